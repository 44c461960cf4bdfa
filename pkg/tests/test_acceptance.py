"""
Acceptance criteria, each with its tolerance and time budget.

Every test records one PASS/FAIL line, printed immediately and repeated in
the terminal summary. Run with ``pytest tests/test_acceptance.py -s``.
"""

import contextlib
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from wdipln import cli
from wdipln.circuit import (
    ADDSUB_HALF_WIDTH_PM,
    ADDSUB_HARDWARE_IMBALANCE,
    Imbalance,
    SpectralGrid,
    addsub_panel,
    count_dips,
    evaluate,
    sweep,
)
from wdipln.devices import RingDevice, ring_phase_winding, ring_transfer
from wdipln.mlp import GateTask, MlpModel, gradient_check, run_gate_experiment, train
from wdipln.neuron import NeuronConfig, configure, expected_mac, measure, reference_config
from wdipln.scaling import ArchitectureSpec, Variant, electrical_io, footprint, pad_area, pad_grid

LAM0 = 1526.0


@contextlib.contextmanager
def criterion(name: str, budget_s: float | None = None):
    """Time the block and record a PASS/FAIL line for ``name``."""
    notes: list[str] = []
    start = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"took {elapsed:.2f} s, budget {budget_s} s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        line = f"FAIL  {name}  ({elapsed:.2f} s)  {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    else:
        line = f"PASS  {name}  ({elapsed:.2f} s)"
    finally:
        if notes:
            line += "  [" + "; ".join(notes) + "]"
        ACCEPTANCE_LINES.append(line)
        print(line)


# ----------------------------------------------------------------- scaling

TABLE = {
    # (variant, M): (size as displayed, io)
    (Variant.COLN_NOMINAL, 1): ("12.8", 64),
    (Variant.COLN_THERMAL, 1): ("7.2", 64),
    (Variant.WDIPLN_NAIVE, 1): ("1.6e-3", 64),
    (Variant.WDIPLN_NOMINAL, 1): ("8.08e-2", 64),
    (Variant.COLN_NOMINAL, 8): ("102.4", 512),
    (Variant.COLN_THERMAL, 8): ("57.6", 512),
    (Variant.WDIPLN_NAIVE, 8): ("1.28e-2", 512),
    (Variant.WDIPLN_NOMINAL, 8): ("8.64e-2", 288),
}


def as_displayed(value: float, shown: str) -> str:
    """Format ``value`` with the precision and notation of ``shown``."""
    if "e" in shown:
        mantissa = shown.split("e")[0]
        decimals = len(mantissa.split(".")[1]) if "." in mantissa else 0
        return f"{value:.{decimals}e}".replace("e-0", "e-").replace("e+0", "e")
    decimals = len(shown.split(".")[1]) if "." in shown else 0
    return f"{value:.{decimals}f}"


def test_table_golden():
    with criterion("scaling table: 16 cells exact at displayed precision", 1.0) as notes:
        cells = 0
        for (variant, m), (size, io) in TABLE.items():
            spec = ArchitectureSpec(variant, 8, m)
            assert as_displayed(footprint(spec), size) == size, (variant, m)
            assert electrical_io(spec) == io, (variant, m)
            cells += 2
        notes.append(f"{cells} cells")
        assert cells == 16


def test_pad_area():
    with criterion("pad area: 288 pads on 16x18 at 150 um = 6.48 mm^2", 1.0):
        assert pad_grid(288) == (16, 18)
        assert round(pad_area(288, 100.0, 150.0, 16, 18), 12) == 6.48


# ------------------------------------------------------------------- rings


def random_ring(rng, a, r):
    length = 2 * math.pi * rng.uniform(5.0, 20.0)
    order = round(2.4 * length * 1e3 / LAM0)
    n_eff = order * LAM0 / (length * 1e3)
    return RingDevice(r=r, a0=a, roundtrip_length=length, n_eff0=n_eff, n_group=rng.uniform(3.5, 4.5))


def test_ring_properties():
    with criterion("ring properties: null, unimodularity, winding on 1000 rings", 10.0) as notes:
        rng = np.random.default_rng(2024)
        worst_null = worst_unit = 0.0
        windings = 0
        for _ in range(1000):
            k = rng.uniform(0.0, 0.999)
            worst_null = max(worst_null, abs(ring_transfer(random_ring(rng, k, k), LAM0)))

            lossless = random_ring(rng, 1.0, rng.uniform(0.0, 0.999))
            lam = rng.uniform(1500.0, 1600.0, 16)
            worst_unit = max(worst_unit, float(np.max(np.abs(np.abs(ring_transfer(lossless, lam)) - 1.0))))

            a, r = rng.uniform(0.3, 1.0), rng.uniform(0.0, 0.999)
            while abs(a - r) <= 1e-3:
                a, r = rng.uniform(0.3, 1.0), rng.uniform(0.0, 0.999)
            ring = random_ring(rng, a, r)
            fsr = float(ring.fsr(LAM0))
            sweep_lam = np.linspace(LAM0 - 0.45 * fsr, LAM0 + 0.45 * fsr, 64)
            assert ring_phase_winding(ring, sweep_lam) == (1 if a > r else 0), (a, r)
            windings += 1
        notes.append(f"null {worst_null:.1e}, |E|-1 {worst_unit:.1e}, windings {windings}")
        assert worst_null <= 1e-10
        assert worst_unit <= 1e-10


# ------------------------------------------------------------------ neuron


def test_mac_oracle():
    with criterion("MAC oracle: 1000 random neurons (N <= 8) within 2e-3", 60.0) as notes:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            config = NeuronConfig(tuple(rng.uniform(-1, 1, n)), tuple(rng.uniform(0, 1, n)))
            worst = max(worst, abs(measure(config) - expected_mac(config)))
        notes.append(f"max error {worst:.2e}")
        assert worst <= 2e-3


def test_channel_isolation():
    with criterion("channel isolation: nominal WDIPLN, M=4, 20 linewidths, < 1%", 60.0) as notes:
        rng = np.random.default_rng(11)
        m, n = 4, 4
        worst = mac_error = 0.0
        for _ in range(10):
            signs = rng.choice([-1.0, 1.0], n)
            w = (signs * rng.uniform(0, 1, (m, n))).ravel()
            x = np.tile(rng.uniform(0, 1, n), m)
            config = NeuronConfig(tuple(w), tuple(x), channel_assignments={i: i // n for i in range(m * n)})
            circuit = configure(config, "wdipln-nominal")
            ref = configure(reference_config(config), "wdipln-nominal")
            for j, lam in enumerate(circuit.channels):
                full = abs(evaluate(circuit, lam))
                alone = abs(evaluate(circuit.isolate_channel(j), lam))
                worst = max(worst, abs(full - alone) / abs(evaluate(ref.isolate_channel(j), lam)))
                mac_error = max(mac_error, abs(measure(config, "wdipln-nominal", channel=j) - expected_mac(config, j)))
        notes.append(f"crosstalk {worst:.1e}")
        notes.append(f"info: per-channel signed readout vs dot product {mac_error:.3f}")
        assert worst < 0.01


# ------------------------------------------------------------- add/subtract


def test_addsub_matrix():
    with criterion("add/subtract matrix: dips 1/2/3, null panel, cancellation, hardware floor", 30.0) as notes:
        grid = SpectralGrid.around(LAM0, ADDSUB_HALF_WIDTH_PM, 1.0)
        dips = [count_dips(sweep(addsub_panel(row, 1), grid)) for row in (1, 2, 3)]
        assert dips == [1, 2, 3]

        null = sweep(addsub_panel(1, 2), grid)
        assert np.all(null.transmission_db <= -100)

        for column in (3, 4):
            circuit = addsub_panel(2, column)
            bias_only = replace(circuit, branches=((), ()), imbalance=Imbalance((0.0, 0.0), (0.0, 0.0)))
            assert abs(evaluate(circuit, LAM0) - evaluate(bias_only, LAM0)) <= 1e-12

        floor = float(np.median(sweep(addsub_panel(1, 2, imbalance=ADDSUB_HARDWARE_IMBALANCE), grid).transmission_db))
        notes.append(f"hardware floor {floor:.1f} dB")
        assert -40 <= floor <= -25


# ------------------------------------------------------------------- gates


@pytest.mark.parametrize("task", list(GateTask), ids=lambda t: t.value)
def test_gate(task):
    with criterion(f"gate {task.value}: 4/4 and stages within 5e-3", 60.0) as notes:
        model = train(task, seed=0)
        log = run_gate_experiment(task, model)
        worst = max(abs(row.activated - row.software) for stage in log.stages for row in stage.rows)
        notes.append(f"accuracy {log.accuracy:.2f}, stage error {worst:.1e}")
        assert log.accuracy == 1.0
        assert worst <= 5e-3


def test_gradient_check():
    with criterion("gradient check: 100 random models within 1e-6", 10.0) as notes:
        rng = np.random.default_rng(3)
        tasks = list(GateTask)
        worst = 0.0
        for k in range(100):
            model = MlpModel.from_params(rng.normal(0.0, 1.0, 9))
            worst = max(worst, gradient_check(model, tasks[k % len(tasks)].arrays()))
        notes.append(f"max error {worst:.1e}")
        assert worst <= 1e-6


# ------------------------------------------------------------- determinism

COMMANDS = [
    ["sweep", "--bundled", "addsub_v"],
    ["addsub", "--noise-preset", "hardware", "--seed", "4"],
    ["gates", "--gate", "xor", "--noise-preset", "mild", "--seed", "2"],
    ["scaling", "-N", "8", "-M", "8", "--pad-size-um", "100"],
    ["eval", "{config}", "--format", "json"],
]


def test_rerun_is_byte_identical(tmp_path):
    with criterion("determinism: rerun from manifest is byte-identical") as notes:
        config = tmp_path / "neuron.json"
        config.write_text(json.dumps({"weights": [0.5, -0.25, 0.75], "inputs": [1, 0.2, 0.5], "bias": 0.1}))
        compared = 0
        for k, command in enumerate(COMMANDS):
            argv = [a.format(config=config) for a in command]
            first, second = tmp_path / f"a{k}", tmp_path / f"b{k}"
            assert cli.main([*argv, "--out", str(first)]) == 0
            (manifest,) = first.glob("*.manifest.json")
            assert cli.main(["rerun", str(manifest), "--out", str(second)]) == 0
            for entry in json.loads(manifest.read_text())["outputs"]:
                assert (first / entry["path"]).read_bytes() == (second / entry["path"]).read_bytes()
                compared += 1
        notes.append(f"{compared} files compared")
