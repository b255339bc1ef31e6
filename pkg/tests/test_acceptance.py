"""Acceptance suite: one printed verdict line per criterion.

Criteria 4-6 and 9 run on the desk-scale slice. The reference desk data is
the first 100k ratings of MovieLens-1M; that dump is not bundled, so by
default these tests run on the seeded synthetic stand-in from
``tgmc.synth`` (same file format, same windowing, staggered user arrivals
like a real rating site). Point TGMC_ML1M at a real ``ratings.dat`` to run
them on the genuine slice instead. Criterion 7 (full-scale, multi-hour) is
informational and lives in ``scripts/reproduce_full.py``.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines.
"""
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import dense_encoder_forward
from tgmc import cli, pipeline, synth, verify
from tgmc.decoder import (DecoderParams, decode_probs_batch,
                          expected_rating_batch, init_decoder_params)
from tgmc.encoder import encoder_forward, init_encoder_params
from tgmc.graph import NormalizationSpec, build_rating_window
from tgmc.ingest import (RatingTable, WindowingConfig, build_windows,
                         train_test_split)
from tgmc.numerics import DropoutSpec, make_rng
from tgmc.pipeline import (PredictionRecord, TemporalTrainConfig,
                           WindowTrainConfig, evaluate, run_experiment,
                           static_state_from)

# --------------------------------------------------------------------------
# desk-scale configuration (criteria 4, 5, 6, 9)
# --------------------------------------------------------------------------

DESK_SEEDS = (42, 43, 44, 45, 46)

DESK_STREAM = synth.DriftConfig(
    n_users=1200, n_items=700, n_events=100_000, n_windows=11,
    window_seconds=91 * 86_400, drift=3.0, noise=0.25,
    arrival_span=0.8, burst=3.0, decay=0.7, seed=7)

DESK_WINDOW = dict(epochs=600, batch_size=10**9, learning_rate=2e-3,
                   dropout=0.3, hidden_dim=32, latent_dim=8)

DESK_TEMPORAL = dict(layers=2, epochs=1000, learning_rate=5e-3,
                     share_user_item=True, mask_inactive_rows=True)


def _desk_table():
    """Synthetic stand-in, or the real slice when TGMC_ML1M is set."""
    path = os.environ.get("TGMC_ML1M")
    if not path:
        return synth.drift_table(DESK_STREAM), "synthetic stand-in"
    from tgmc.ingest import parse_ratings
    events, _ = parse_ratings(Path(path), "movielens-1m")
    order = np.argsort(events.ts, kind="stable")[:100_000]
    sl = events.take(order)
    return sl, f"ML-1M slice from {path}"


def _report(capsys, line: str) -> None:
    with capsys.disabled():
        print(line, flush=True)


def _desk_windowing(table, accumulative: bool) -> WindowingConfig:
    """Train on all but the last two windows (9 of 11 on the stand-in)."""
    span = int(table.ts.max()) - int(table.ts.min())
    t = span // DESK_STREAM.window_seconds + 1
    return WindowingConfig(window_length_seconds=DESK_STREAM.window_seconds,
                           accumulative=accumulative,
                           train_windows=max(t - 2, 1))


@pytest.fixture(scope="session")
def desk_runs():
    """Five seeded desk runs; window models shared across temporal cells."""
    table, source = _desk_table()
    ds = build_windows(table, _desk_windowing(table, True))
    ds_n = build_windows(table, _desk_windowing(table, False))

    t0 = time.time()
    rows = []
    for seed in DESK_SEEDS:
        wtc = WindowTrainConfig(seed=seed, **DESK_WINDOW)
        run = run_experiment(ds, wtc,
                             TemporalTrainConfig(cell="lstm", seed=seed,
                                                 **DESK_TEMPORAL))
        static = pipeline.evaluate(
            pipeline.predict_test_windows(static_state_from(run),
                                          train_test_split(ds)), {})
        cells = {"lstm": run.report.rmse}
        for cell in ("gru", "vanilla"):
            tm = pipeline.train_temporal(
                run.state.window_models,
                TemporalTrainConfig(cell=cell, seed=seed, **DESK_TEMPORAL))
            st = pipeline.TrainedState(
                run.state.window_models, tm, run.state.stats,
                run.state.id_maps, run.state.user_seen, run.state.item_seen,
                run.state.window_cfg, run.state.temporal_cfg)
            split = train_test_split(ds)
            cells[cell] = pipeline.evaluate(
                pipeline.predict_test_windows(st, split), {}).rmse
        run_n = run_experiment(ds_n, wtc,
                               TemporalTrainConfig(cell="lstm", seed=seed,
                                                   **DESK_TEMPORAL))
        rows.append({"seed": seed, "acc": run.report.rmse,
                     "static": static.rmse, "nonacc": run_n.report.rmse,
                     **{f"cell_{k}": v for k, v in cells.items()}})
    return {"rows": rows, "seconds": time.time() - t0, "source": source}


# --------------------------------------------------------------------------
# criterion 1: gradient suite
# --------------------------------------------------------------------------

def test_criterion_1_gradient_suite(capsys):
    t0 = time.time()
    results = verify.run_all(seed=0, step=1e-5)
    elapsed = time.time() - t0
    worst = max(r.max_rel_err for r in results)
    names = {r.name for r in results}
    for expected in ("encoder[sum]", "encoder[stack]", "decoder",
                     "vanillax1", "vanillax3", "grux2", "lstmx3",
                     "decoder-weight"):
        assert expected in names
    ok = worst < 1e-5 and elapsed < 60
    _report(capsys, f"criterion 1 [{'pass' if ok else 'FAIL'}] gradient "
            f"suite: {len(results)} checks, worst rel err {worst:.2e} "
            f"(< 1e-5), {elapsed:.1f}s (< 60s)")
    assert ok


# --------------------------------------------------------------------------
# criterion 2: sparse encoder vs dense oracle
# --------------------------------------------------------------------------

def test_criterion_2_dense_oracle_equivalence(capsys):
    rng = make_rng(20240)
    t0 = time.time()
    worst = 0.0
    for trial in range(100):
        n_users = int(rng.integers(2, 11))
        n_items = int(rng.integers(2, 11))
        n_edges = int(rng.integers(1, n_users * n_items + 1))
        cells = rng.choice(n_users * n_items, size=n_edges, replace=False)
        users, items = np.divmod(cells, n_items)
        ratings = rng.integers(1, 6, size=n_edges)
        table = RatingTable(users, items, ratings,
                            np.zeros(n_edges, np.int64))
        window = build_rating_window(table, (n_users, n_items, 5))
        accum = ("sum", "stack")[trial % 2]
        mode = ("symmetric", "left")[(trial // 2) % 2]
        hidden = int(rng.integers(3, 7))
        latent = int(rng.integers(2, hidden + 1))
        params = init_encoder_params(rng, n_users, n_items, 5, hidden,
                                     latent, accum, dtype=np.float64)
        acts = encoder_forward(window, params, NormalizationSpec(mode),
                               DropoutSpec(0.0, "eval"))
        zu, zv = dense_encoder_forward(
            n_users, n_items, list(zip(users, items, ratings)),
            params.w_msg_to_user, params.w_msg_to_item,
            params.w_dense_user, params.w_dense_item, accum=accum, mode=mode)
        worst = max(worst,
                    float(np.abs(acts.z_user - zu).max()),
                    float(np.abs(acts.z_item - zv).max()))
    elapsed = time.time() - t0
    ok = worst < 1e-5 and elapsed < 60
    _report(capsys, f"criterion 2 [{'pass' if ok else 'FAIL'}] sparse vs "
            f"dense encoder: 100 windows, max |diff| {worst:.2e} (< 1e-5), "
            f"{elapsed:.1f}s (< 60s)")
    assert ok


# --------------------------------------------------------------------------
# criterion 3: distribution and range properties
# --------------------------------------------------------------------------

def test_criterion_3_distribution_properties(capsys):
    rng = make_rng(33033)
    worst_sum = 0.0
    lo, hi = np.inf, -np.inf
    for _ in range(1000):
        d = int(rng.integers(2, 7))
        n = int(rng.integers(1, 8))
        scale = float(rng.uniform(0.1, 3.0))
        u = rng.normal(0.0, scale, (n, d))
        v = rng.normal(0.0, scale, (n, d))
        params = init_decoder_params(rng, 5, d, dtype=np.float64)
        probs = decode_probs_batch(u, v, params)
        worst_sum = max(worst_sum,
                        float(np.abs(probs.sum(axis=1) - 1.0).max()))
        exp = expected_rating_batch(probs)
        lo, hi = min(lo, float(exp.min())), max(hi, float(exp.max()))

    # untrained end to end: all-zero parameters must score exactly 3.0
    toy = synth.DriftConfig(n_users=20, n_items=12, n_events=240,
                            n_windows=3, window_seconds=86_400, seed=5)
    ds = build_windows(synth.drift_table(toy),
                       WindowingConfig(window_length_seconds=86_400,
                                       accumulative=True, train_windows=2))
    wtc = WindowTrainConfig(epochs=2, batch_size=10**9, learning_rate=1e-2,
                            dropout=0.0, hidden_dim=6, latent_dim=3, seed=0)
    run = run_experiment(ds, wtc, TemporalTrainConfig(cell="lstm", layers=1,
                                                      epochs=2, seed=0))
    state = run.state
    for m in state.window_models:
        for arr in m.encoder.named().values():
            arr[:] = 0.0
        m.decoder.q[:] = 0.0
        m.u_emb[:] = 0.0
        m.v_emb[:] = 0.0
    for sm in (state.temporal.user_model, state.temporal.item_model,
               state.temporal.weight_model):
        if sm is not None:
            sm.zero_params()
    queries = [(state.id_maps.users.raw(0), state.id_maps.items.raw(0)),
               (state.id_maps.users.raw(1), state.id_maps.items.raw(1))]
    zero_ok = all(p.predicted == 3.0
                  for horizon in (1, 2)
                  for p in pipeline.predict_window(state, horizon, queries))

    ok = worst_sum < 1e-6 and 1.0 <= lo and hi <= 5.0 and zero_ok
    _report(capsys, f"criterion 3 [{'pass' if ok else 'FAIL'}] decoder "
            f"properties: 1000 draws, max |sum-1| {worst_sum:.2e} (< 1e-6), "
            f"expectations in [{lo:.3f}, {hi:.3f}] within [1,5], "
            f"zero-parameter prediction == 3.0 exactly: {zero_ok}")
    assert ok


# --------------------------------------------------------------------------
# criteria 4-6: desk-scale orderings
# --------------------------------------------------------------------------

def test_criterion_4_accumulative_ordering(desk_runs, capsys):
    rows = desk_runs["rows"]
    wins = sum(r["acc"] < r["nonacc"] for r in rows)
    pairs = ", ".join(f"{r['acc']:.3f}<{r['nonacc']:.3f}"
                      if r["acc"] < r["nonacc"] else
                      f"{r['acc']:.3f}>={r['nonacc']:.3f}" for r in rows)
    in_time = desk_runs["seconds"] < 1800
    ok = wins >= 4 and in_time
    _report(capsys, f"criterion 4 [{'pass' if ok else 'FAIL'}] accumulative "
            f"< non-accumulative in {wins}/5 seeds (need >= 4) on "
            f"{desk_runs['source']}: {pairs}; desk stage "
            f"{desk_runs['seconds']:.0f}s (< 1800s)")
    assert ok


def test_criterion_5_temporal_vs_static(desk_runs, capsys):
    rows = desk_runs["rows"]
    wins = sum(r["acc"] < r["static"] for r in rows)
    pairs = ", ".join(f"{r['acc']:.3f}<{r['static']:.3f}"
                      if r["acc"] < r["static"] else
                      f"{r['acc']:.3f}>={r['static']:.3f}" for r in rows)
    in_time = desk_runs["seconds"] < 1800
    ok = wins >= 4 and in_time
    _report(capsys, f"criterion 5 [{'pass' if ok else 'FAIL'}] temporal "
            f"< static in {wins}/5 seeds (need >= 4) on "
            f"{desk_runs['source']}: {pairs}")
    assert ok


def test_criterion_6_cell_ordering(desk_runs, capsys):
    rows = desk_runs["rows"]
    means = {c: float(np.mean([r[f"cell_{c}"] for r in rows]))
             for c in ("lstm", "gru", "vanilla")}
    gated = (means["vanilla"] < means["lstm"] - 0.02
             and means["vanilla"] < means["gru"] - 0.02)
    ok = not gated
    _report(capsys, f"criterion 6 [{'pass' if ok else 'FAIL'}] cell means: "
            f"lstm {means['lstm']:.4f}, gru {means['gru']:.4f}, vanilla "
            f"{means['vanilla']:.4f}; fails only if vanilla beats both "
            f"by > 0.02")
    assert ok


# --------------------------------------------------------------------------
# criterion 7: full-scale reproduction (informational)
# --------------------------------------------------------------------------

def test_criterion_7_full_scale_pointer(capsys):
    script = Path(__file__).resolve().parents[1] / "scripts" / \
        "reproduce_full.py"
    assert script.exists(), "reproduction script missing"
    _report(capsys, "criterion 7 [info] full-scale reproduction is "
            "multi-hour and informational; run scripts/reproduce_full.py "
            "--input <ml-1m ratings.dat>")
    if not os.environ.get("TGMC_ML1M"):
        pytest.skip("set TGMC_ML1M to a ratings.dat path (and run the "
                    "script directly) for the full-scale numbers")


# --------------------------------------------------------------------------
# criterion 8: metric fixtures
# --------------------------------------------------------------------------

def _record(pred, actual):
    return PredictionRecord(user_raw="u", item_raw="i", window=9,
                            predicted=pred, actual=actual, cold_start=False)


def test_criterion_8_metric_fixtures(capsys):
    fixtures = [
        ([3.0, 3.0], [1, 5], 2.0, 2.0),
        ([1.0, 2.0, 3.0], [1, 2, 3], 0.0, 0.0),
        ([5.0, 1.0, 4.0, 4.0], [1, 5, 3, 2],
         float(np.sqrt((16 + 16 + 1 + 4) / 4)), (4 + 4 + 1 + 2) / 4),
    ]
    results = []
    for preds, actuals, want_rmse, want_mae in fixtures:
        rep = evaluate([_record(p, a) for p, a in zip(preds, actuals)], {})
        results.append(rep.rmse == want_rmse and rep.mae == want_mae)
    ok = all(results)
    _report(capsys, f"criterion 8 [{'pass' if ok else 'FAIL'}] metric "
            f"fixtures exact: {len(fixtures)}/{len(fixtures)} match, "
            f"including [1,5] vs [3,3] -> rmse 2.0, mae 2.0")
    assert ok


# --------------------------------------------------------------------------
# criterion 9: byte-identical reruns
# --------------------------------------------------------------------------

def test_criterion_9_pipeline_determinism(tmp_path, capsys):
    table, source = _desk_table()
    stream = tmp_path / "ratings.dat"
    with open(stream, "w", encoding="utf-8") as fh:
        for k in range(len(table)):
            fh.write(f"{table.user[k] + 1}::{table.item[k] + 1}::"
                     f"{table.rating[k]}::{table.ts[k]}\n")
    cfgfile = tmp_path / "desk.json"
    cfgfile.write_text(json.dumps({
        "windowing": {"window_days": 91.0, "train_windows": 9},
        "window_training": {k: v for k, v in DESK_WINDOW.items()},
        "temporal": {"cell": "lstm", **DESK_TEMPORAL},
        "seed": 42,
    }))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        argv = ["pipeline", "--input", str(stream), "--config", str(cfgfile),
                "--out-dir", str(out)]
        assert cli.main(argv) == 0
        outs.append(out)
    same_report = ((outs[0] / "report.json").read_bytes()
                   == (outs[1] / "report.json").read_bytes())
    same_preds = ((outs[0] / "predictions.csv").read_bytes()
                  == (outs[1] / "predictions.csv").read_bytes())
    ok = same_report and same_preds
    _report(capsys, f"criterion 9 [{'pass' if ok else 'FAIL'}] same-seed "
            f"pipeline reruns byte-identical on {source}: report.json "
            f"{same_report}, predictions.csv {same_preds}")
    assert ok
