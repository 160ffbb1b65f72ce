"""Core predictive models and the attribution explainer.

Each model is a self-contained plug-in conforming to one scoring interface
(`fit` / score-window / serialize / deserialize) so further model types can
be added without pipeline changes.
"""

from .base import MODEL_TYPES, deserialize_model, register_model_type, serialize_model
from .arima import ArimaModel, arima_fit, arima_forecast
from .iforest import IsolationForestModel, c_factor, iforest_fit, iforest_score
from .attribution import AttributionReport, attribute

__all__ = [
    "MODEL_TYPES",
    "register_model_type",
    "serialize_model",
    "deserialize_model",
    "ArimaModel",
    "arima_fit",
    "arima_forecast",
    "IsolationForestModel",
    "iforest_fit",
    "iforest_score",
    "c_factor",
    "AttributionReport",
    "attribute",
]
