"""Real-time anomaly detection platform for metric streams.

Subpackages and modules:

- ``vigil.timeseries``: windows, quantiles, smoothing, seasonality, boundaries
- ``vigil.models``: ARIMA and Isolation Forest detectors plus attribution
- ``vigil.detect``: the streaming detection pipeline (rule filter, hold, smoothing)
- ``vigil.drift``: distribution drift statistics and the self-healing lifecycle
- ``vigil.store``: durable signal/model/alert registries and artifact storage
- ``vigil.cluster``: leader election, work partitioning, model cache
- ``vigil.orchestrator``: the minute-tick inference runtime
- ``vigil.api`` / ``vigil.cli``: HTTP surface and operator command line
"""

__version__ = "0.1.0"
