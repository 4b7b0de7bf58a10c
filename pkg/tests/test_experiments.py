import math
from dataclasses import asdict, replace

import numpy as np
import pytest

from pwnn import experiments as ex
from pwnn.experiments import ExperimentSpec, ResultRow


def strip_timing(row: ResultRow) -> dict:
    d = asdict(row)
    for c in ex.TIMING_COLUMNS:
        d.pop(c)
    return d


SMALL = ExperimentSpec(name="t", problem="KD", k=3.0, units=6, n_f=40, n_per_edge=8,
                       optimizer={"max_iter": 60}, seeds=[0, 1])


class TestSpec:
    def test_kd_defaults(self):
        s = ExperimentSpec(k=20.0).resolved()
        assert (s.n_f, s.n_per_edge) == (2000, 100)
        assert s.optimizer["memory"] == 50 and s.optimizer["max_iter"] == 50000

    def test_ud_defaults(self):
        s = ExperimentSpec(problem="ud", k=5.0).resolved()
        assert s.problem == "UD" and (s.n_f, s.n_per_edge) == (500, 50)

    @pytest.mark.parametrize("kw", [{"problem": "XX"}, {"solver": "FEM"}, {"k": 0.0},
                                    {"lam": "big"}, {"lam": -1.0}, {"optimizer": {"bogus": 1}}])
    def test_rejects(self, kw):
        with pytest.raises((ValueError, TypeError)):
            ExperimentSpec(**kw)

    def test_od_trains_plane_wave_net(self):
        assert ex.solver_net(ExperimentSpec(), "PWPUM-OD").activation.value == "expi"


class TestRuns:
    def test_deterministic(self):
        a = ex.run_spec(SMALL)
        b = ex.run_spec(SMALL)
        assert [strip_timing(r) for r in a] == [strip_timing(r) for r in b]

    def test_workers_do_not_change_rows(self):
        a = ex.run_spec(SMALL)
        b = ex.run_spec(SMALL, workers=2)
        assert [strip_timing(r) for r in a] == [strip_timing(r) for r in b]

    def test_row_fields(self):
        row = ex.run_spec(replace(SMALL, seeds=[0]))[0]
        assert row.status == "ok" and row.n_g == 32 and row.iterations <= 60
        assert row.accuracy == pytest.approx(-math.log10(row.epsilon))
        assert row.dir_max_deg == ""  # no true directions for KD

    def test_single_plane_wave_is_learned(self):
        # one unit, one true wave: the landscape is multimodal in the direction, so a
        # run either lands on the exact solution or stalls far from it
        spec = ExperimentSpec(problem="UD", k=2.0, directions=1, units=1, n_f=50, n_per_edge=10,
                              optimizer={"max_iter": 500}, seeds=list(range(6)))
        rows = ex.run_spec(spec)
        hits = [r for r in rows if r.epsilon <= 1e-6]
        assert hits
        assert all(r.dir_max_deg <= 1e-3 for r in hits)
        assert all(r.epsilon > 0.5 for r in rows if r not in hits)

    def test_failure_recorded(self, monkeypatch):
        def boom(*a, **kw):
            raise FloatingPointError("diverged")
        monkeypatch.setattr(ex, "train_network", boom)
        row = ex.run_one(SMALL, 0).row
        assert row.status.startswith("error: FloatingPointError")
        assert math.isnan(row.epsilon)

    def test_pw_rows(self):
        spec = replace(SMALL, solver="PWPUM", units=7)
        row = ex.run_one(spec, 0).row
        assert row.layers == "" and row.n_f == 0 and row.alpha == 0.0 and row.condition > 1
        wt = ex.run_one(spec, 0, "PWPUM-WT").row
        assert 0 <= wt.alpha < 2 * math.pi / 7

    def test_od_reuses_network(self):
        spec = replace(SMALL, problem="UD", k=3.0, directions=2, units=4, n_f=60, n_per_edge=10,
                       optimizer={"max_iter": 200}, seeds=[0])
        net = ex.run_one(spec, 0, "PWNN")
        od = ex.run_one(spec, 0, "PWPUM-OD", network=(net.params, net.trace, net.row.lam))
        assert od.row.iterations == net.row.iterations
        assert od.row.status == "ok" and od.row.dir_max_deg != ""


class TestSummaries:
    @pytest.fixture(scope="class")
    @staticmethod
    def compare_rows():
        base = ExperimentSpec(optimizer={"max_iter": 40})
        return ex.run_pwpum_compare(3.0, [4, 6], [0, 1], n_f=40, n_per_edge=8, base=base)

    def test_compare_rows(self, compare_rows):
        solvers = sorted({r.solver for r in compare_rows})
        assert solvers == ["PWNN", "PWPUM", "PWPUM-OD", "PWPUM-WT"]
        assert len(compare_rows) == 2 * (2 + 2 * 2)

    def test_compare_table_shape(self, compare_rows):
        table = ex.compare_table(compare_rows)
        assert [t["units"] for t in table] == [4, 6]
        assert all(set(t) == {"units", "PWPUM", "PWPUM-WT", "PWNN", "PWPUM-OD"} for t in table)
        assert all(np.isfinite(t[m]) for t in table for m in t)

    def test_summarize(self, compare_rows):
        cells = ex.summarize(compare_rows)
        assert len(cells) == 8
        for c in cells:
            assert c.best <= c.median <= c.worst and c.failed == 0
            assert c.runs == (1 if c.solver in ("PWPUM", "PWPUM-WT") else 2)

    def test_summarize_statistics(self):
        rows = [ResultRow(**{**asdict(ex.run_one(replace(SMALL, solver="PWPUM"), 0).row),
                             "seed": s, "epsilon": e}) for s, e in enumerate([1.0, 2.0, 6.0])]
        c = ex.summarize(rows)[0]
        assert (c.median, c.mean, c.best, c.worst) == (2.0, 3.0, 1.0, 6.0)
        assert c.std == pytest.approx(math.sqrt(14 / 3))

    def test_ud_table(self):
        base = ExperimentSpec(optimizer={"max_iter": 40})
        rows = ex.run_ud_bench(3.0, 2, 4, trials=2, n_f=40, n_per_edge=8, base=base)
        table = ex.ud_table(rows)
        assert [t["statistic"] for t in table] == ["average", "max_pwnn", "min_pwnn"]
        pw = {r.seed: r.epsilon for r in rows if r.solver == "PWNN"}
        assert table[1]["PWNN"] == max(pw.values()) and table[2]["PWNN"] == min(pw.values())


def test_loss_curve_non_increasing():
    curves = ex.loss_curves(replace(SMALL, seeds=[0]), ("PWNN", "TANN"))
    for solver in ("PWNN", "TANN"):
        loss = [c["loss"] for c in curves if c["solver"] == solver]
        assert loss[0] > 0 and len(loss) > 1
        assert all(b <= a for a, b in zip(loss, loss[1:]))
        norm = [c["normalized_loss"] for c in curves if c["solver"] == solver]
        assert norm[0] == 1.0
