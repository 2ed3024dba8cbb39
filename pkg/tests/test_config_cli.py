"""Configuration parsing, defaults, the CLI and its output files."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from kwc_control.cli import main
from kwc_control.config import build_problem, field_values, pair_values, parse_config, spec_from_dict
from kwc_control.errors import ConfigError
from kwc_control.mesh import Mesh1D, TimeGrid
from kwc_control.state import frozen_tau0


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_minimal_state_config_defaults(tmp_path):
    spec = parse_config(write(tmp_path, {"mode": "state"}))
    d = spec.to_dict()
    assert d["cells"] == 64 and d["eps"] == 0.1 and d["consistent_mass"] is False
    pb = build_problem(spec)
    bound = frozen_tau0(pb.cfg, pb.init)
    assert d["tau"] <= 0.5 * bound
    assert d["tau"] > 0.5 * bound * d["steps"] / (d["steps"] + 1) - 1e-15
    assert d["tau"] == pytest.approx(d["T"] / d["steps"])


def test_round_trip_of_resolved_config(tmp_path):
    for obj in ({}, {"benchmark": "smooth"}, {"benchmark": "facet", "cells": 16}, {"mode": "linear"}):
        d = spec_from_dict(obj).to_dict()
        again = parse_config(write(tmp_path, d)).to_dict()
        assert again == d


def test_json_syntax_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        parse_config(write(tmp_path, '{"mode": "state",\n  "cells": ,}'))


def test_negative_weight_names_nonnegativity(tmp_path):
    with pytest.raises(ConfigError, match="nonnegative"):
        parse_config(write(tmp_path, {"weights": {"K": -1.0}}))


def test_unknown_material_lists_catalog(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {"material": {"name": "steel"}}))
    for name in ("default", "varying_alpha0", "no_reaction"):
        assert name in str(exc.value)


def test_every_violation_is_listed(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {"cells": 1, "nu": -1, "mode": "draw", "bogus": 1}))
    msg = str(exc.value)
    for part in ("cells", "nu", "mode", "bogus"):
        assert part in msg


def test_overrides_replace_file_values(tmp_path):
    spec = parse_config(write(tmp_path, {"steps": 10, "cells": 8}), {"tau": 0.01, "cells": 16, "seed": 7})
    d = spec.to_dict()
    assert d["cells"] == 16 and d["steps"] == 100 and d["seed"] == 7


def test_field_specs():
    mesh, tg = Mesh1D(4), TimeGrid(1.0, 2)
    x = mesh.nodes
    np.testing.assert_allclose(field_values(2.0, mesh, tg), 2.0)
    np.testing.assert_allclose(field_values(list(x), mesh, tg)[1], x)
    np.testing.assert_allclose(field_values({"kind": "sin", "amp": 2, "k": 1}, mesh, tg)[0], 2 * np.sin(np.pi * x))
    v = field_values({"kind": "cos", "offset": 1, "amp": 0.5, "time": {"kind": "sin", "amp": 0.5}}, mesh, tg)
    np.testing.assert_allclose(v[1], (1 + 0.5 * np.cos(np.pi * x)) * 1.5)
    np.testing.assert_allclose(field_values({"kind": "plateau", "height": 0.5, "slope": 2}, mesh, tg)[0], [0, 0.5, 0.5, 0.5, 0])
    np.testing.assert_allclose(pair_values([1, 2], tg), [[1, 2]] * 3)
    with pytest.raises(ValueError):
        field_values([1, 2], mesh, tg)
    with pytest.raises(ValueError):
        field_values({"kind": "spline"}, mesh, tg)


def test_inverse_crime_targets_come_from_known_control():
    pb = build_problem(spec_from_dict({"benchmark": "inverse_crime", "steps": 16, "T": 0.5}))
    assert np.max(np.abs(pb.cfg.eta_ad)) > 0.1
    np.testing.assert_array_equal(pb.cfg.eta_Gamma_ad, pb.cfg.eta_ad[:, [0, -1]])


def test_explicit_targets_replace_generated_ones():
    d = spec_from_dict({"benchmark": "inverse_crime", "targets": {"theta": 0.5}}).to_dict()
    assert "from_controls" not in d["targets"] and d["targets"]["theta"] == 0.5
    assert "from_controls" in spec_from_dict({"benchmark": "inverse_crime"}).to_dict()["targets"]


def test_cli_state_run_writes_outputs_and_manifest(tmp_path):
    cfgp = write(tmp_path, {"mode": "state", "cells": 8, "T": 0.05})
    out = tmp_path / "out"
    assert main(["run", str(cfgp), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["exit_code"] == 0
    assert {"numpy", "scipy", "python", "kwc_control"} <= set(man["versions"])
    assert man["timings"]["total_seconds"] >= 0
    assert spec_from_dict(man["config"]).to_dict() == man["config"]
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "x", "eta", "theta"]
    assert len(rows) == 1 + (man["config"]["steps"] + 1) * 9
    assert read_csv(out / "energy.csv")[0] == ["t", "phi", "ghat", "work", "dissipation"]
    assert read_csv(out / "boundary.csv")[0] == ["t", "eta_Gamma_0", "eta_Gamma_1"]
    # full precision floats
    val = rows[5][2]
    assert float(val) == float(repr(float(val)))


def test_cli_is_deterministic(tmp_path):
    cfgp = write(tmp_path, {"mode": "state", "cells": 8, "T": 0.05, "eps": 0.0})
    for d in ("a", "b"):
        assert main(["run", str(cfgp), "--out", str(tmp_path / d), "--seed", "3"]) == 0
    for f in ("trajectory.csv", "energy.csv", "boundary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, '{"mode": "state",}', "bad.json")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    neg = write(tmp_path, {"weights": {"M": -2}}, "neg.json")
    assert main(["run", str(neg)]) == 2
    # configured step far above the bound: the adjoint solve refuses -> solver failure
    fail = write(tmp_path, {"mode": "optimize", "cells": 8, "T": 0.5, "steps": 2, "optimizer": {"max_iters": 2}}, "f.json")
    assert main(["run", str(fail), "--out", str(tmp_path / "of")]) == 1
    man = json.loads((tmp_path / "of" / "manifest.json").read_text())
    assert man["summary"]["status"] == "solver_failure"
    assert "configuration error" in capsys.readouterr().err


def test_cli_adjoint_linear_and_optimize_modes(tmp_path):
    out = tmp_path / "adj"
    assert main(["run", str(write(tmp_path, {"benchmark": "smooth"}, "s.json")), "--out", str(out)]) == 0
    assert read_csv(out / "adjoint.csv")[0] == ["t", "x", "p", "z"]
    assert (out / "gradient.csv").exists()
    out = tmp_path / "lin"
    assert main(["run", str(write(tmp_path, {"mode": "linear", "cells": 8, "linear": {"h": 1.0}}, "l.json")), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert all(v["passed"] for v in man["summary"]["apriori"].values())
    out = tmp_path / "opt"
    cfg = {"benchmark": "inverse_crime", "T": 0.5, "steps": 16, "cells": 8, "optimizer": {"max_iters": 10}}
    assert main(["run", str(write(tmp_path, cfg, "o.json")), "--out", str(out)]) == 0
    hist = read_csv(out / "history.csv")
    assert hist[0] == ["iter", "eps", "cost", "grad_norm", "step", "optimality_residual"]
    costs = [float(r[2]) for r in hist[1:]]
    assert all(b <= a for a, b in zip(costs, costs[1:]))


def test_cli_continuation_mode(tmp_path):
    cfg = {"benchmark": "facet", "cells": 8, "steps": 8, "T": 0.25, "optimizer": {"max_iters": 3},
           "continuation": {"eps_levels": [0.5, 0.1]}}
    out = tmp_path / "c"
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(out)]) == 0
    rows = read_csv(out / "certificate.csv")
    assert rows[0] == ["t", "x", "nu_circ", "xi_circ", "sgn_residual"]
    assert max(abs(float(r[2])) for r in rows[1:]) <= 1.0
    man = json.loads((out / "manifest.json").read_text())
    assert len(man["summary"]["levels"]) == 2


def test_cli_verify_default_config(tmp_path):
    out = tmp_path / "v"
    cfg = write(tmp_path, {"cells": 16, "verify": {"samples": 1000, "gronwall_instances": 50, "C": 10.0}})
    assert main(["verify", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "verify_report.csv")
    assert rows[0] == ["check", "status", "margin", "tolerance"]
    assert {r[1] for r in rows[1:]} == {"PASS"}
