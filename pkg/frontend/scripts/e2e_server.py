"""Boot a live service instance preloaded with data the UI tests drive.

Seeds two signals with a week of minutely samples, snapshots both, trains
one model, records an open alert plus one with false-positive feedback,
and manufactures a pending retrain proposal with a trained candidate so
the approve flow has something real to bump.
"""

import argparse
import sys

import numpy as np
import uvicorn

from vigil.api import build_runtime, create_app
from vigil.detect import DetectorSpec
from vigil.drift import DriftReport
from vigil.orchestrator import DAY_MS, VirtualClock
from vigil.training import MODE_FULL, TrainRequest

MINUTE_MS = 60_000
BASE_MS = 20_000 * DAY_MS


def seed_signal(rt, name, metric, n, rng):
    record = rt.stores.signals.register(name, metric + "{}", BASE_MS)
    values = 100 + 4 * np.sin(np.arange(n) * 2 * np.pi / 1440) \
        + rng.normal(0, 1, n)
    for i in range(n):
        rt.metrics.append(metric, float(values[i]),
                          BASE_MS - (n - i) * MINUTE_MS)
    rt.stores.snapshot_signal(record.signal_id, rt.metrics, BASE_MS,
                              step_ms=rt.step_ms)
    return record


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--data-dir", required=True)
    args = parser.parse_args()

    rt = build_runtime(args.data_dir,
                       base_url=f"http://127.0.0.1:{args.port}",
                       post=lambda url, body: 200)
    rt.clock = VirtualClock(BASE_MS)
    rng = np.random.default_rng(17)
    n = 7 * 1440 + 60

    # onboarding target: snapshotted but not yet modeled
    seed_signal(rt, "cpu load", "node_cpu", n, rng)

    # console target: modeled, alerted on, and flagged noisy
    latency = seed_signal(rt, "api latency", "api_latency", n, rng)
    request = TrainRequest(
        model_type="arima_uv", mode=MODE_FULL,
        signal_ids=[latency.signal_id],
        detector_spec=DetectorSpec.from_dict(
            {"flow": "univariate", "hold_window": 5, "hold_tolerance": 1}),
        seed=1)
    _, record = rt.train_and_register(request, register=True)

    verdict = {"triggered_by": "hold", "breach_count": 5, "anomaly_count": 4}
    rt.stores.alerts.record_alert(record.model_id, record.version,
                                  BASE_MS - 3 * MINUTE_MS, verdict, "high")
    judged = rt.stores.alerts.record_alert(
        record.model_id, record.version, BASE_MS - 9 * MINUTE_MS, verdict,
        "low")
    rt.stores.alerts.record_feedback(judged.alert_id, "false_positive",
                                     "ops", BASE_MS)

    report = DriftReport(model_id=record.model_id, ks=0.08, psi=0.05,
                         kl=0.01, js=0.008, wasserstein=0.3,
                         daily_alert_count=96, verdict="noisy",
                         evaluated_at=BASE_MS)
    rt.stores.drift_reports.put(report)
    proposal = rt.propose_retrain(record, report, BASE_MS)
    print(f"seeded model={record.model_id} proposal={proposal.proposal_id}",
          file=sys.stderr, flush=True)

    uvicorn.run(create_app(rt), host="127.0.0.1", port=args.port,
                log_level="warning")


if __name__ == "__main__":
    main()
