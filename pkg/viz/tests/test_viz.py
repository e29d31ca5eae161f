import numpy as np
import pytest

from axieuler_viz.cli import main
from axieuler_viz.plots import FigureSpec, render
from axieuler_viz.schema import SchemaError, read_table


def write_fixture(path, schema, cols, rows):
    lines = [f"# axieuler-csv schema={schema} version=1", ",".join(cols)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


def beta_fixture(tmp_path, flat=False):
    p = tmp_path / "beta.csv"
    t = np.linspace(0, 1, 11)
    b = np.ones_like(t) if flat else 1 + 0.5 * t
    rows = [(tt, bb, bb, 0.5, 0.5, 0) for tt, bb in zip(t, b)]
    write_fixture(p, "growth_beta",
                  ["t", "beta", "beta_running", "argmax_r", "argmax_z",
                   "n_reflected"], rows)
    return p


def lambda_fixture(tmp_path, flat=False):
    p = tmp_path / "lambda.csv"
    t = np.linspace(0, 1, 11)
    l = np.ones_like(t) if flat else 1 + 0.7 * t
    write_fixture(p, "growth_lambda", ["t", "lambda"], list(zip(t, l)))
    return p


def ledger_fixture(tmp_path, zero=False):
    p = tmp_path / "criterion.csv"
    t = np.linspace(0, 1, 11)
    val = np.zeros_like(t) if zero else 2 * t
    run = np.zeros_like(t) if zero else t ** 2
    rows = [(tt, vv, vv, vv, rr, "bounded") for tt, vv, rr in
            zip(t, val, run)]
    write_fixture(p, "criterion_ledger",
                  ["t", "bkm_integrand", "gen_integrand_r",
                   "gen_integrand_z", "running_integral", "verdict"], rows)
    return p


def scaling_fixture(tmp_path, p_exp=4.0):
    p = tmp_path / "scaling.csv"
    t = np.linspace(0, 0.9, 10)
    thr = 1 + 4 / p_exp
    rows = [(tt, np.exp(tt), np.exp(tt) * (1 - tt), 1.0, thr, "verdict")
            for tt in t]
    write_fixture(p, "scaling",
                  ["t", "lambda_p", "Lambda_p", "profile_inf_norm",
                   "threshold", "verdict"], rows)
    return p


# ------------------------------------------------------------------ schema

def test_read_table_roundtrip(tmp_path):
    p = beta_fixture(tmp_path)
    cols, data = read_table(p, "growth_beta")
    assert cols[0] == "t" and data.shape == (11, 6)


def test_read_table_rejects_wrong_schema(tmp_path):
    p = beta_fixture(tmp_path)
    with pytest.raises(SchemaError):
        read_table(p, "growth_lambda")


def test_read_table_rejects_wrong_version(tmp_path):
    p = tmp_path / "v9.csv"
    p.write_text("# axieuler-csv schema=growth_lambda version=9\n"
                 "t,lambda\n0,1\n")
    with pytest.raises(SchemaError) as e:
        read_table(p, "growth_lambda")
    assert "version" in str(e.value)


def test_read_table_rejects_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        read_table(tmp_path / "nope.csv", "growth_beta")


def test_read_table_rejects_empty(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(SchemaError):
        read_table(p, "growth_beta")


# ------------------------------------------------------------------- plots

def test_growth_renders_flat_lines(tmp_path):
    out = tmp_path / "g.png"
    rc = main(["growth", "--in", str(beta_fixture(tmp_path, flat=True)),
               str(lambda_fixture(tmp_path, flat=True)), "--out", str(out)])
    assert rc == 0 and out.exists() and out.stat().st_size > 0


def test_growth_renders_real_series(tmp_path):
    out = tmp_path / "g2.png"
    rc = main(["growth", "--in", str(beta_fixture(tmp_path)),
               str(lambda_fixture(tmp_path)), "--out", str(out)])
    assert rc == 0 and out.exists()


def test_criterion_renders(tmp_path):
    for zero in (True, False):
        out = tmp_path / f"c{zero}.png"
        rc = main(["criterion", "--in", str(ledger_fixture(tmp_path, zero)),
                   "--out", str(out)])
        assert rc == 0 and out.exists()


def test_scaling_renders_threshold_line(tmp_path):
    out = tmp_path / "s.png"
    rc = main(["scaling", "--in", str(scaling_fixture(tmp_path, 4.0)),
               "--out", str(out)])
    assert rc == 0 and out.exists()


def test_deterministic_rendering(tmp_path):
    beta = beta_fixture(tmp_path)
    lam = lambda_fixture(tmp_path)
    outs = []
    for name in ("a.png", "b.png"):
        out = tmp_path / name
        assert main(["growth", "--in", str(beta), str(lam),
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_deterministic_svg(tmp_path):
    led = ledger_fixture(tmp_path)
    outs = []
    for name in ("a.svg", "b.svg"):
        out = tmp_path / name
        assert main(["criterion", "--in", str(led), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


# --------------------------------------------------------------- cli errors

def test_schema_mismatch_exit_code_2(tmp_path):
    lam = lambda_fixture(tmp_path)
    rc = main(["growth", "--in", str(lam), str(lam),
               "--out", str(tmp_path / "x.png")])
    assert rc == 2


def test_version_mismatch_exit_code_2(tmp_path):
    p = tmp_path / "old.csv"
    p.write_text("# axieuler-csv schema=criterion_ledger version=0\n"
                 "t,bkm_integrand,gen_integrand_r,gen_integrand_z,"
                 "running_integral,verdict\n0,0,0,0,0,ok\n")
    rc = main(["criterion", "--in", str(p), "--out",
               str(tmp_path / "x.png")])
    assert rc == 2


def test_empty_csv_exit_code_2(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    rc = main(["criterion", "--in", str(p), "--out",
               str(tmp_path / "x.png")])
    assert rc == 2


def test_wrong_input_count_exit_code_2(tmp_path):
    rc = main(["growth", "--in", str(beta_fixture(tmp_path)),
               "--out", str(tmp_path / "x.png")])
    assert rc == 2


def test_figure_spec_validation():
    with pytest.raises(ValueError):
        FigureSpec(kind="field", inputs=("a",), out="x.png")
    with pytest.raises(ValueError):
        FigureSpec(kind="growth", inputs=("a", "b"), out="x.png",
                   yscale="cubic")


def test_smoke_from_real_run(tmp_path):
    """End-to-end: consume CSVs produced by the simulation package, if it
    is installed (the boundary stays CSV-only either way)."""
    pytest.importorskip("axieuler")
    import json
    from axieuler.cli import main as axmain

    cfg = {"grid": {"r_max": 1.0, "z_min": 0.0, "z_max": 1.0, "nr": 32,
                    "nz": 32},
           "flow": {"name": "gaussian_swirl_ring",
                    "params": {"amplitude": 0.4, "delta": 0.2}},
           "t_final": 0.05, "snapshot_stride": 2,
           "ensemble": {"n_x": 6, "n_xi": 2, "dt": 5e-3, "record_every": 2}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    sim = tmp_path / "sim"
    assert axmain(["simulate", "--config", str(cfg_path), "--out",
                   str(sim)]) == 0
    tr = tmp_path / "tr"
    assert axmain(["trace", "--config", str(cfg_path), "--snapshots",
                   str(sim), "--out", str(tr)]) == 0
    mo = tmp_path / "mo"
    assert axmain(["monitor", "--config", str(cfg_path), "--snapshots",
                   str(sim), "--out", str(mo)]) == 0
    out = tmp_path / "fig.png"
    assert main(["growth", "--in", str(tr / "beta.csv"),
                 str(lambda_fixture(tmp_path)), "--out", str(out)]) == 0
    assert main(["criterion", "--in", str(mo / "criterion.csv"),
                 "--out", str(tmp_path / "crit.png")]) == 0
