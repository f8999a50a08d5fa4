import math

import numpy as np
import pytest

from meanfield_ldp.densities import GridDensity, logistic_density
from meanfield_ldp.fileio import (
    FileFormatError,
    dump_json,
    load_json,
    read_curve,
    read_density,
    read_measure,
    read_samples,
    read_table,
    read_weights_csv,
    write_curve,
    write_density,
    write_measure_csv,
    write_measure_json,
    write_samples,
    write_table,
)
from meanfield_ldp.measures import EmpiricalMeasure
from meanfield_ldp.models import rb_logistic_flux
from meanfield_ldp.sampler import SamplerConfig, sample_equilibrium
from meanfield_ldp.spt import typical_curve


def test_measure_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    for d in (1, 3):
        m = EmpiricalMeasure(rng.normal(size=(7, d)) * 1e3)
        for name, writer in (("m.csv", write_measure_csv), ("m.json", write_measure_json)):
            path = writer(m, tmp_path / f"{d}{name}")
            back = read_measure(path)
            assert np.array_equal(back.atoms, m.atoms)


def test_measure_json_accepts_plain_list(tmp_path):
    path = tmp_path / "plain.json"
    path.write_text("[0.5, -1.0, 2.0]")
    assert np.array_equal(read_measure(path).points, [0.5, -1.0, 2.0])


def test_header_and_version_checks(tmp_path):
    m = EmpiricalMeasure.from_points([1.0, 2.0])
    path = write_measure_csv(m, tmp_path / "m.csv")
    text = path.read_text()
    assert text.startswith("# meanfield-ldp measure v1")
    (tmp_path / "v9.csv").write_text(text.replace(" v1", " v9", 1))
    with pytest.raises(FileFormatError):
        read_measure(tmp_path / "v9.csv")
    (tmp_path / "other.csv").write_text(text.replace("measure", "curve", 1))
    with pytest.raises(FileFormatError):
        read_measure(tmp_path / "other.csv")
    with pytest.raises(FileFormatError):
        read_density(path)


def test_samples_round_trip(tmp_path):
    cfg = SamplerConfig(n=5, chains=3, burn_in=10, thin=2, total_samples=4, seed=42)
    s = sample_equilibrium(rb_logistic_flux(), cfg)
    path = write_samples(s, tmp_path / "s.csv")
    assert (tmp_path / "s.csv.json").exists()
    back = read_samples(path)
    assert np.array_equal(back.samples, s.samples)
    assert back.config == s.config
    assert back.model == s.model and back.sigma2 == s.sigma2
    assert back.diagnostics == s.diagnostics


def test_empty_sample_set_round_trip(tmp_path):
    s = sample_equilibrium(rb_logistic_flux(), SamplerConfig(n=3, total_samples=0, burn_in=2))
    back = read_samples(write_samples(s, tmp_path / "e.csv"))
    assert back.samples.shape == (0, 3, 1)


def test_density_round_trip(tmp_path):
    p = GridDensity.from_function(logistic_density, -10, 10, 400, meta={"sigma2": 2.0, "model": "rb:logistic-flux"})
    back = read_density(write_density(p, tmp_path / "p.csv"))
    assert (back.a, back.b) == (p.a, p.b)
    assert np.array_equal(back.values, p.values)
    assert back.meta == p.meta
    (tmp_path / "p.csv.json").unlink()
    bare = read_density(tmp_path / "p.csv")
    assert bare.a == pytest.approx(-10) and bare.b == pytest.approx(10)


def test_curve_round_trip(tmp_path):
    c = typical_curve(rb_logistic_flux(), 12)
    back = read_curve(write_curve(c, tmp_path / "c.csv"))
    assert np.array_equal(back.log_rank, c.log_rank) and np.array_equal(back.log_weight, c.log_weight)


def test_table_round_trip_with_missing_and_infinite(tmp_path):
    rows = [{"n": 8, "p_hat": 0.25, "slope": None, "upper": math.inf, "ok": True},
            {"n": 16, "p_hat": 1 / 3, "slope": 0.1, "upper": 2.5, "ok": False}]
    back = read_table(write_table(rows, tmp_path / "t.csv", kind="ldp"), kind="ldp")
    assert back == rows
    with pytest.raises(FileFormatError):
        read_table(tmp_path / "t.csv", kind="table")


def test_json_is_sorted_and_handles_non_finite(tmp_path):
    path = dump_json({"b": np.float64(math.inf), "a": np.arange(3), "c": np.bool_(True)}, tmp_path / "x.json")
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert load_json(path) == {"a": [0, 1, 2], "b": "inf", "c": True}


def test_weights_csv(tmp_path):
    (tmp_path / "col.csv").write_text("weight\n3\n1\n")
    assert np.allclose(read_weights_csv(tmp_path / "col.csv"), [0.75, 0.25])
    (tmp_path / "row.csv").write_text("# market\n1,1,2\n")
    assert np.allclose(read_weights_csv(tmp_path / "row.csv"), [0.25, 0.25, 0.5])
    (tmp_path / "bad.csv").write_text("1\n-2\n")
    with pytest.raises(FileFormatError):
        read_weights_csv(tmp_path / "bad.csv")
    (tmp_path / "mixed.csv").write_text("1\nabc\n")
    with pytest.raises(FileFormatError):
        read_weights_csv(tmp_path / "mixed.csv")
