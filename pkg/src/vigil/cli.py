"""Command line entry points.

Local commands (onboard, train, preview, replay, bench, chaos, synth)
operate on a data directory directly; `serve` runs a node with the HTTP
API and the scoring loop.  Any platform error exits nonzero with a one
line message, and `--output json-lines` switches reporting commands to
machine-readable records.
"""

from __future__ import annotations

import csv
import functools
import json
import re
import tempfile
import threading
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .api import build_runtime, create_app
from .cluster.cache import ModelCache
from .cluster.node import ElectionRunner
from .cluster.simulation import kill_leader_scenario
from .detect import FLOW_MV, FLOW_UV, DetectorSpec
from .errors import NotFound, VigilError
from .evaluation import confusion, point_adjusted
from .metrics import MetricStore
from .orchestrator import LocalWorker, Runtime, VirtualClock
from .store import Stores
from .synth import inject_point_anomalies, mv_benchmark_dataset, seasonal_series
from .timeseries import SeriesWindow
from .training import DEFAULT_CONFIGS, MODE_FULL, MODE_PREVIEW, TrainRequest
from .webhook import WebhookDispatcher

MINUTE_MS = 60_000

OUTPUT_OPTION = click.option(
    "--output", type=click.Choice(["text", "json-lines"]), default="text",
    show_default=True, help="Report format.")
DATA_DIR_OPTION = click.option(
    "--data-dir", envvar="VIGIL_DATA_DIR", default="vigil-data",
    show_default=True, help="Durable store directory.")


def fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VigilError as exc:
            detail = f" {exc.details}" if exc.details else ""
            raise SystemExit(f"error: {exc.code}: {exc.message}{detail}")
    return wrapper


def emit(output: str, payload: dict, text: str) -> None:
    if output == "json-lines":
        click.echo(json.dumps(payload, default=str))
    else:
        click.echo(text)


def _parse_spec(raw: str | None, n_signals: int) -> DetectorSpec:
    spec = dict(json.loads(raw)) if raw else {}
    spec.setdefault("flow", FLOW_MV if n_signals > 1 else FLOW_UV)
    return DetectorSpec.from_dict(spec)


def _resolve_signal(stores: Stores, ref: str):
    try:
        return stores.signals.get(ref)
    except NotFound:
        return stores.signals.get_by_name(ref)


def _metric_name(raw: str) -> str:
    name = re.sub(r"[^A-Za-z0-9_]", "_", raw)
    return name if re.match(r"[A-Za-z_]", name) else f"m_{name}"


@click.group()
def main():
    """Real-time anomaly detection platform."""


# -- serve ------------------------------------------------------------------


def _parse_addr(raw: str) -> tuple[str, int]:
    host, _, port = raw.rpartition(":")
    if not host or not port.isdigit():
        raise SystemExit(f"error: bad address (want HOST:PORT): {raw!r}")
    return host, int(port)


@main.command()
@DATA_DIR_OPTION
@click.option("--host", envvar="VIGIL_HOST", default="127.0.0.1",
              show_default=True)
@click.option("--port", envvar="VIGIL_PORT", default=8420, type=int,
              show_default=True)
@click.option("--node-id", default="n0", show_default=True)
@click.option("--peer", "peers", multiple=True, metavar="ID=HOST:PORT",
              help="Election peer; repeat once per other node.")
@click.option("--listen", metavar="HOST:PORT",
              help="Election transport bind address (required with --peer).")
@click.option("--election-timeout", envvar="VIGIL_ELECTION_TIMEOUT_S",
              default=1.0, type=float, show_default=True,
              help="Election timeout base in seconds.")
@click.option("--step-ms", envvar="VIGIL_TICK_MS", default=MINUTE_MS,
              type=int, show_default=True, help="Scoring tick period.")
@click.option("--base-url", envvar="VIGIL_BASE_URL", default="",
              help="Public URL used in webhook action links.")
@click.option("--api-token", envvar="VIGIL_API_TOKEN", default=None,
              help="Require this bearer token on /v1 endpoints.")
@click.option("--tick/--no-tick", default=True, show_default=True,
              help="Run the scoring loop in this process.")
@click.option("--seed", default=None, type=int,
              help="Election timer seed (testing).")
@fail_cleanly
def serve(data_dir, host, port, node_id, peers, listen, election_timeout,
          step_ms, base_url, api_token, tick, seed):
    """Run one node: HTTP API plus the minute-tick scoring loop.

    Without --peer the node leads alone.  With peers, only the elected
    leader ticks; every node serves the API over the shared data
    directory it was given.
    """
    import uvicorn

    runtime = build_runtime(data_dir, node_id=node_id, step_ms=step_ms,
                            base_url=base_url or f"http://{host}:{port}")
    runner = None
    if peers:
        if not listen:
            raise SystemExit("error: --peer requires --listen")
        peer_map = {}
        for item in peers:
            peer_id, _, addr = item.partition("=")
            if not peer_id or not addr:
                raise SystemExit(f"error: bad --peer (want ID=HOST:PORT): {item!r}")
            peer_map[peer_id] = _parse_addr(addr)
        runner = ElectionRunner(node_id, _parse_addr(listen), peer_map,
                                timeout_base_s=election_timeout, seed=seed)
        runner.start()

    stop = threading.Event()
    if tick:
        gate = None if runner is None else (lambda: runner.is_leader)
        loop = threading.Thread(
            target=runtime.run_forever, kwargs={"gate": gate, "stop": stop},
            daemon=True, name="tick-loop")
        loop.start()
    click.echo(f"{node_id}: serving http://{host}:{port} "
               f"(data: {data_dir}, tick: {'on' if tick else 'off'}, "
               f"election: {'on' if runner else 'solo'})", err=True)
    try:
        uvicorn.run(create_app(runtime, api_token=api_token),
                    host=host, port=port, log_level="warning")
    finally:
        stop.set()
        if runner is not None:
            runner.stop()


# -- onboarding ----------------------------------------------------------------


def _read_csv(path: str) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "ts_ms" or len(header) < 2:
            raise SystemExit("error: CSV header must be ts_ms,value "
                             "or ts_ms,f1,...,fk")
        columns = [c.strip() for c in header[1:]]
        ts, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise SystemExit(f"error: line {lineno}: expected "
                                 f"{len(header)} columns, got {len(row)}")
            try:
                ts.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise SystemExit(f"error: line {lineno}: {exc}")
    if not ts:
        raise SystemExit("error: CSV has no data rows")
    return columns, np.asarray(ts, dtype=np.int64), np.asarray(rows)


@main.command()
@click.option("--csv", "csv_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Columns ts_ms,value or ts_ms,f1,...,fk.")
@click.option("--name", required=True, help="Signal name; multivariate "
              "columns register as NAME.COLUMN.")
@DATA_DIR_OPTION
@click.option("--step-ms", default=MINUTE_MS, type=int, show_default=True)
@OUTPUT_OPTION
@fail_cleanly
def onboard(csv_path, name, data_dir, step_ms, output):
    """Ingest a CSV as registered signal(s) plus a training snapshot."""
    columns, ts, rows = _read_csv(csv_path)
    stores = Stores(data_dir)
    now = int(time.time() * 1000)
    for j, column in enumerate(columns):
        signal_name = name if len(columns) == 1 else f"{name}.{column}"
        try:
            record = stores.signals.get_by_name(signal_name)
        except NotFound:
            record = stores.signals.register(
                signal_name, _metric_name(signal_name), now)
        window = SeriesWindow(record.signal_id, ts, rows[:, j],
                              step_ms=step_ms)
        meta = stores.datasets.write(window)
        stores.signals.update(replace(record, last_snapshot_at=now,
                                      last_snapshot_short=meta.short))
        emit(output,
             {"signal_id": record.signal_id, "name": signal_name,
              "rows": meta.rows, "short": meta.short},
             f"{signal_name}: {record.signal_id} ({meta.rows} rows"
             f"{', short' if meta.short else ''})")


# -- training ---------------------------------------------------------------


def _run_training(data_dir, signal_refs, model_type, spec_json, seed, mode,
                  register, channel, output):
    runtime = build_runtime(data_dir)
    records = [_resolve_signal(runtime.stores, ref) for ref in signal_refs]
    signal_ids = tuple(r.signal_id for r in records)
    if model_type is None:
        model_type = "arima_uv" if len(signal_ids) == 1 else "iforest_mv"
    request = TrainRequest(model_type=model_type, mode=mode,
                           signal_ids=signal_ids, seed=seed,
                           detector_spec=_parse_spec(spec_json,
                                                     len(signal_ids)))
    result, record = runtime.train_and_register(request, register=register,
                                                channel_ref=channel)
    payload = {
        "mode": result.mode,
        "artifact_ref": result.artifact_ref,
        "trained_rows": result.trained_rows,
        "flagged_count": result.preview.get("flagged_count"),
        "model": record.to_dict() if record else None,
    }
    if output == "json-lines":
        payload["preview"] = result.preview
        click.echo(json.dumps(payload, default=str))
        return
    if record is not None:
        click.echo(f"registered {record.model_id} v{record.version}")
    click.echo(f"{result.mode}: {result.trained_rows} rows, "
               f"{payload['flagged_count']} flagged, "
               f"artifact {result.artifact_ref[:12]}")


@main.command()
@click.option("--signal", "signal_refs", multiple=True, required=True,
              help="Signal name or id; repeat for multivariate.")
@click.option("--model-type", type=click.Choice(sorted(DEFAULT_CONFIGS)),
              default=None, help="Default inferred from signal count.")
@click.option("--spec", "spec_json", default=None,
              help="Detector spec overrides as JSON.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--register/--no-register", default=True, show_default=True)
@click.option("--channel", default=None, help="Webhook URL for alerts.")
@DATA_DIR_OPTION
@OUTPUT_OPTION
@fail_cleanly
def train(signal_refs, model_type, spec_json, seed, register, channel,
          data_dir, output):
    """Train on the stored snapshot and register the model."""
    _run_training(data_dir, signal_refs, model_type, spec_json, seed,
                  MODE_FULL, register, channel, output)


@main.command()
@click.option("--signal", "signal_refs", multiple=True, required=True,
              help="Signal name or id; repeat for multivariate.")
@click.option("--model-type", type=click.Choice(sorted(DEFAULT_CONFIGS)),
              default=None)
@click.option("--spec", "spec_json", default=None,
              help="Detector spec overrides as JSON.")
@click.option("--seed", default=0, type=int, show_default=True)
@DATA_DIR_OPTION
@OUTPUT_OPTION
@fail_cleanly
def preview(signal_refs, model_type, spec_json, seed, data_dir, output):
    """Fast-train on the last 3 days; nothing is registered."""
    _run_training(data_dir, signal_refs, model_type, spec_json, seed,
                  MODE_PREVIEW, register=False, channel=None, output=output)


# -- labeled synthetic datasets -----------------------------------------------


@main.command()
@click.option("--kind", type=click.Choice(["uv", "mv0", "mv1", "mv2", "mv3"]),
              default="uv", show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output JSON path.")
@click.option("--days", default=10, type=int, show_default=True,
              help="uv: total length in days.")
@click.option("--train-days", default=7, type=int, show_default=True,
              help="uv: leading anomaly-free span used for training.")
@click.option("--anomalies", default=40, type=int, show_default=True,
              help="uv: injected point anomalies.")
@click.option("--magnitude", default=15.0, type=float, show_default=True,
              help="uv: anomaly size, between noise and seasonal swing.")
@fail_cleanly
def synth(kind, seed, out, days, train_days, anomalies, magnitude):
    """Write a labeled synthetic dataset for replay."""
    if kind == "uv":
        if train_days >= days:
            raise SystemExit("error: --train-days must be below --days")
        series = seasonal_series(days=days, seed=seed)
        train_rows = train_days * 1440
        values, idx = inject_point_anomalies(
            series.values, anomalies, magnitude, seed, start=train_rows)
        labels = np.zeros(len(values), dtype=int)
        labels[idx] = 1
        # point anomalies score the newest sample only: any hold beyond
        # one tick echoes each spike into false positives by design
        payload = {
            "kind": "uv", "step_ms": MINUTE_MS,
            "start_ts": int(series.timestamps[0]),
            "train_rows": train_rows,
            "values": [float(v) for v in values],
            "labels": labels.tolist(),
            "detector_spec": {"hold_window": 1, "hold_tolerance": 0},
        }
    else:
        ds = mv_benchmark_dataset(kind=int(kind[2:]), seed=seed)
        train_rows = len(ds.window) // 2
        injected = int(ds.y_true.sum()) + len(ds.transient_idx)
        payload = {
            "kind": "mv", "step_ms": MINUTE_MS,
            "start_ts": int(ds.window.timestamps[0]),
            "train_rows": train_rows,
            "values": [[float(v) for v in row] for row in ds.window.values],
            "labels": ds.y_true.astype(int).tolist(),
            "detector_spec": {"hold_window": 5, "hold_tolerance": 1,
                              "smoothing_alpha": 0.4},
            # the training half carries the same injection rate, so the
            # forest boundary must assume that much contamination
            "params": {"contamination": round(injected / len(ds.window), 3)},
        }
    Path(out).write_text(json.dumps(payload), encoding="utf-8")
    click.echo(f"{out}: {kind} dataset, {len(payload['values'])} points, "
               f"{sum(payload['labels'])} anomalous, "
               f"{train_rows} training rows")


# -- replay ---------------------------------------------------------------------


def _replay_world(payload: dict, seed: int, spec_json: str | None, tmp: str):
    """Stores, runtime, and a trained model over the dataset's train prefix."""
    values = np.asarray(payload["values"], dtype=np.float64)
    step_ms = int(payload.get("step_ms", MINUTE_MS))
    start_ts = int(payload.get("start_ts", 1_700_006_400_000))
    train_rows = int(payload["train_rows"])
    if values.ndim == 1:
        values = values[:, None]
    n, k = values.shape
    if not 0 < train_rows < n:
        raise SystemExit("error: train_rows must split the dataset")

    runtime = build_runtime(tmp, step_ms=step_ms)
    runtime.clock = VirtualClock(start_ts + train_rows * step_ms)
    ts = start_ts + step_ms * np.arange(n, dtype=np.int64)
    signal_ids = []
    for j in range(k):
        record = runtime.stores.signals.register(f"replay.f{j}",
                                                 f"replay_f{j}",
                                                 runtime.clock.now_ms())
        signal_ids.append(record.signal_id)
        runtime.stores.datasets.write(SeriesWindow(
            record.signal_id, ts[:train_rows], values[:train_rows, j],
            step_ms=step_ms))

    model_type = "arima_uv" if k == 1 else "iforest_mv"
    spec_dict = dict(payload.get("detector_spec") or {})
    if spec_json:
        spec_dict.update(json.loads(spec_json))
    spec_dict.setdefault("flow", FLOW_MV if k > 1 else FLOW_UV)
    if k > 1:
        spec_dict.pop("seasonality_period", None)
    request = TrainRequest(model_type=model_type, mode=MODE_FULL,
                           signal_ids=tuple(signal_ids), seed=seed,
                           params=dict(payload.get("params") or {}),
                           detector_spec=DetectorSpec.from_dict(spec_dict))
    config = replace(DEFAULT_CONFIGS[model_type],
                     min_training_length=min(
                         DEFAULT_CONFIGS[model_type].min_training_length,
                         train_rows))
    _, record = runtime.train_and_register(request, config=config)

    # pre-seed the live window with trailing history so tick one can score
    points = runtime._window_points(record)
    lead = min(points, train_rows)
    for j in range(k):
        runtime.metrics.append_many(
            f"replay_f{j}", ts[train_rows - lead:train_rows],
            values[train_rows - lead:train_rows, j])
    return runtime, record, values, ts, train_rows


@main.command()
@click.option("--dataset", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Labeled JSON dataset (see `vigil synth`).")
@click.option("--speed", type=click.Choice(["max", "real"]), default="max",
              show_default=True, help="max: virtual clock, no sleeping.")
@click.option("--spec", "spec_json", default=None,
              help="Detector spec overrides as JSON.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--tolerance", default=2, type=int, show_default=True,
              help="Credit window for the point-adjusted score line.")
@OUTPUT_OPTION
@fail_cleanly
def replay(dataset, speed, spec_json, seed, tolerance, output):
    """Tick through a labeled dataset and score the run against labels."""
    payload = json.loads(Path(dataset).read_text(encoding="utf-8"))
    labels = np.asarray(payload["labels"], dtype=int)
    with tempfile.TemporaryDirectory(prefix="vigil-replay-") as tmp:
        runtime, record, values, ts, train_rows = _replay_world(
            payload, seed, spec_json, tmp)
        step_ms = runtime.step_ms

        preds = []
        for i in range(train_rows, len(values)):
            for j in range(values.shape[1]):
                runtime.metrics.append(f"replay_f{j}", values[i, j],
                                       int(ts[i]))
            report = runtime.inference_tick(int(ts[i]))
            flagged = record.model_id in report.anomalies
            preds.append(flagged)
            if speed == "real":
                time.sleep(step_ms / 1000.0)
            if output == "json-lines":
                click.echo(json.dumps({"tick": report.to_dict(),
                                       "ts_ms": int(ts[i]),
                                       "anomaly": flagged}))

        y_true = labels[train_rows:]
        y_pred = np.asarray(preds, dtype=bool)
        raw = confusion(y_true, y_pred)
        adjusted = point_adjusted(y_true, y_pred, tolerance=tolerance)
        alerts = runtime.stores.alerts.list(model_id=record.model_id)

    if output == "json-lines":
        click.echo(json.dumps({"confusion": raw.to_dict(),
                               "point_adjusted": adjusted.to_dict(),
                               "alerts": len(alerts)}))
        return
    click.echo(f"replayed {len(y_pred)} ticks, {len(alerts)} alerts")
    for alert in alerts:
        click.echo(f"  anomaly at ts={alert.fired_at} "
                   f"severity={alert.severity}")
    click.echo(f"precision={raw.precision:.4f} recall={raw.recall:.4f} "
               f"balanced_accuracy={raw.balanced_accuracy:.4f}")
    click.echo(f"point-adjusted (tolerance={tolerance}): "
               f"precision={adjusted.precision:.4f} "
               f"recall={adjusted.recall:.4f} "
               f"balanced_accuracy={adjusted.balanced_accuracy:.4f}")


# -- synthetic load -------------------------------------------------------------


def _fleet_world(tmp: str, n_models: int, seed: int, cache_size: int):
    """A runtime with one tiny trained artifact shared by n registered models."""
    stores = Stores(tmp)
    runtime = Runtime(stores, metric_store=MetricStore(),
                      cache=ModelCache(cache_size),
                      webhooks=WebhookDispatcher(post=lambda u, b: None),
                      clock=VirtualClock(20_000 * 86_400_000))
    now = runtime.clock.now_ms()
    rng = np.random.default_rng(seed)
    signal = stores.signals.register("load.cpu", "load_cpu", now)
    n_rows = 240
    ts = now - MINUTE_MS * np.arange(n_rows, 0, -1, dtype=np.int64)
    vals = 100.0 + rng.normal(0.0, 2.0, n_rows)
    stores.datasets.write(SeriesWindow(signal.signal_id, ts, vals,
                                       step_ms=MINUTE_MS))
    config = replace(DEFAULT_CONFIGS["arima_uv"], min_training_length=120)
    request = TrainRequest(
        model_type="arima_uv", mode=MODE_FULL,
        signal_ids=(signal.signal_id,), seed=seed,
        detector_spec=DetectorSpec(hold_window=5, hold_tolerance=1))
    result, _ = runtime.train_and_register(request, register=False,
                                           config=config)
    for i in range(n_models):
        stores.register_model(f"fleet-{i:05d}", "arima_uv",
                              (signal.signal_id,), request.detector_spec,
                              result.artifact_ref, None, now)
    live = 100.0 + rng.normal(0.0, 2.0, 90)
    runtime.metrics.append_many(
        "load_cpu", now - MINUTE_MS * np.arange(90, 0, -1, dtype=np.int64),
        live)
    return runtime


@main.command()
@click.option("--models", "n_models", default=100, type=int,
              show_default=True)
@click.option("--ticks", default=5, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@OUTPUT_OPTION
@fail_cleanly
def bench(n_models, ticks, seed, output):
    """Score a registered fleet and report per-tick wall time."""
    if n_models < 1 or ticks < 1:
        raise SystemExit("error: --models and --ticks must be positive")
    with tempfile.TemporaryDirectory(prefix="vigil-bench-") as tmp:
        runtime = _fleet_world(tmp, n_models, seed,
                               cache_size=n_models + 64)
        durations = []
        marks = []
        for i in range(ticks):
            runtime.clock.advance_ms(MINUTE_MS)
            started = time.perf_counter()
            report = runtime.inference_tick()
            durations.append((time.perf_counter() - started) * 1000.0)
            marks.append((runtime.cache.hits, runtime.cache.misses))
            if len(report.completed) != n_models:
                raise SystemExit(
                    f"error: tick {i} completed {len(report.completed)} "
                    f"of {n_models} models")
            emit(output,
                 {"tick": i, "models": n_models,
                  "duration_ms": durations[-1]},
                 f"tick {i}: {durations[-1]:.1f} ms for {n_models} models")
        warm_hits = marks[-1][0] - marks[0][0]
        warm_misses = marks[-1][1] - marks[0][1]
        warm_total = warm_hits + warm_misses
        warm_ratio = warm_hits / warm_total if warm_total else 1.0
    summary = {
        "models": n_models, "ticks": ticks,
        "cold_tick_ms": durations[0],
        "warm_mean_ms": float(np.mean(durations[1:] or durations)),
        "warm_cache_hit_ratio": warm_ratio,
    }
    emit(output, summary,
         f"cold {summary['cold_tick_ms']:.1f} ms, "
         f"warm mean {summary['warm_mean_ms']:.1f} ms/tick, "
         f"warm cache hit ratio {warm_ratio:.4f}")


@main.command()
@click.option("--kill-leader", is_flag=True, default=False,
              help="Kill the elected leader mid-run.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--nodes", default=5, type=int, show_default=True)
@OUTPUT_OPTION
@fail_cleanly
def chaos(kill_leader, seed, nodes, output):
    """Failure drill: leader loss and a worker dying mid-tick."""
    if kill_leader:
        result = kill_leader_scenario(n_nodes=nodes, seed=seed)
        if result["new_leader"] is None:
            raise SystemExit("error: no re-election within the time budget")
        emit(output,
             {"phase": "election", "killed": result["killed"],
              "killed_term": result["killed_term"],
              "new_leader": result["new_leader"],
              "new_term": result["new_term"],
              "reelect_time_units": result["reelect_time"],
              "messages_sent": result["sent"],
              "messages_lost": result["lost"]},
             f"killed leader {result['killed']} (term "
             f"{result['killed_term']}); re-elected {result['new_leader']} "
             f"(term {result['new_term']}) after "
             f"{result['reelect_time']:.1f} time units")

    n_models = 6
    with tempfile.TemporaryDirectory(prefix="vigil-chaos-") as tmp:
        runtime = _fleet_world(tmp, n_models, seed, cache_size=64)
        runtime.workers = [LocalWorker("w1"), LocalWorker("w2", fail_after=0)]
        runtime.clock.advance_ms(MINUTE_MS)
        report = runtime.inference_tick()
        duplicates = 0
        now = runtime.clock.now_ms()
        for i in range(n_models):
            rows = runtime.metrics.query_range(
                f'vigil_prediction{{model_id="fleet-{i:05d}"}}',
                now, now, MINUTE_MS)
            published = len(rows[0].timestamps) if rows else 0
            if published != 1:
                duplicates += 1
    ok = (duplicates == 0 and not report.failed
          and len(report.completed) == n_models)
    emit(output,
         {"phase": "failover", "models": n_models,
          "completed": len(report.completed),
          "redispatched": list(report.redispatched),
          "failed": report.failed, "duplicate_predictions": duplicates},
         f"failover tick: {len(report.completed)}/{n_models} completed, "
         f"{len(report.redispatched)} re-dispatched, "
         f"duplicate predictions: {duplicates}")
    if not ok:
        raise SystemExit("error: failover tick lost or duplicated work")


if __name__ == "__main__":
    main()
