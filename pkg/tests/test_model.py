"""Two-stage structures: subproblems, aggregated master, dual extraction."""
import numpy as np
import numpy.testing as npt
import pytest

from adaptpart import instances
from adaptpart import lp as lplib
from adaptpart.errors import RecourseViolation, ValidationError
from adaptpart.model import (RecourseModel, build_aggregated_master,
                             evaluate_subproblem, extract_cell_duals,
                             subproblem_lp)

from _generators import (random_discrete_space, random_first_stage_point,
                         random_recourse_model)


def tail_loss_model(tail_cost: float = 1.0) -> RecourseModel:
    """Portfolio threshold model with 2 assets: first stage (x1, x2, tau) on
    the simplex, second stage pays tail_cost per unit of loss beyond tau."""
    return RecourseModel(
        c=np.array([0.0, 0.0, 1.0]), A=np.array([[1.0, 1.0, 0.0]]),
        b=np.array([1.0]), senses=("=",),
        W=np.array([[1.0]]), q=np.array([tail_cost]), recourse_senses=(">=",),
        h_base=np.zeros(1), T_base=np.array([[0.0, 0.0, 1.0]]),
        x_lower=np.array([0.0, 0.0, -np.inf]))


def tail_realization(model: RecourseModel, returns) -> "Realization":
    T = model.T_base.copy()
    T[0, :2] = returns
    return model.realization(T=T)


class TestSubproblem:
    def test_tail_loss_slack(self):
        # -x.r - tau = -0.5 - 0.2 = -0.7 < 0: no excess loss, dual at zero
        model = tail_loss_model()
        out = evaluate_subproblem(model, np.array([1.0, 0.0, 0.2]),
                                  tail_realization(model, (0.5, 0.2)))
        assert out.value == pytest.approx(0.0, abs=1e-9)
        assert out.duals[0] == pytest.approx(0.0, abs=1e-9)

    def test_tail_loss_binding(self):
        # -x.r - tau = 0.5 - 0.2 = 0.3 > 0: pays 0.3, dual at the cost cap
        model = tail_loss_model()
        out = evaluate_subproblem(model, np.array([1.0, 0.0, 0.2]),
                                  tail_realization(model, (-0.5, 0.2)))
        assert out.value == pytest.approx(0.3, abs=1e-9)
        assert out.duals[0] == pytest.approx(1.0, abs=1e-9)

    def test_capacity_demand_by_hand(self):
        # one plant (capacity x=10), two demand rows at 3 each, unit costs 5, 1:
        # ships 3+3, pays 5*3 + 1*3 = 18
        model = RecourseModel(
            c=np.array([1.0]), A=np.array([[1.0]]), b=np.array([20.0]), senses=("<=",),
            W=np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]),
            q=np.array([5.0, 1.0]), recourse_senses=("<=", ">=", ">="),
            h_base=np.array([0.0, 3.0, 3.0]), T_base=np.array([[-1.0], [0.0], [0.0]]))
        out = evaluate_subproblem(model, np.array([10.0]),
                                  model.realization())
        assert out.value == pytest.approx(18.0, abs=1e-9)
        npt.assert_allclose(out.duals, [0.0, 5.0, 1.0], atol=1e-9)

    def test_infeasible_subproblem_raises(self):
        # demand row with no way to serve it: y bounded by capacity 0
        model = RecourseModel(
            c=np.array([1.0]), A=np.array([[1.0]]), b=np.array([5.0]), senses=("<=",),
            W=np.array([[1.0], [1.0]]), q=np.array([1.0]),
            recourse_senses=("<=", ">="),
            h_base=np.array([0.0, 4.0]), T_base=np.array([[-0.0], [0.0]]))
        with pytest.raises(RecourseViolation):
            evaluate_subproblem(model, np.array([1.0]), model.realization())


class TestAggregatedMaster:
    def test_single_deterministic_cell_is_mean_value_lp(self):
        model = random_recourse_model(np.random.default_rng(7))
        h = np.full(model.m, 0.3)
        lp, cmap = build_aggregated_master(model, [(1.0, h, model.T_base)])
        sol = lplib.solve(lp)
        assert sol.status == lplib.OPTIMAL
        # same answer as gluing the single scenario onto the first stage directly
        x = cmap.first_stage(sol)
        out = evaluate_subproblem(model, x, model.realization(h=h))
        assert sol.objective == pytest.approx(model.c @ x + out.value, abs=1e-7)

    def test_lands_one_cell_master_matches_published_mean_value(self):
        doc = instances.lands_document()
        model = instances.document_to_model(doc)
        space = instances.document_to_space(doc, model)
        cell = space.trivial_partition().cells[0]
        lp, _ = build_aggregated_master(model, [(cell.mass, cell.h_mean, cell.t_mean)])
        sol = lplib.solve(lp)
        assert sol.objective == pytest.approx(378.667, abs=1e-3)

    def test_one_cell_bound_below_two_cell(self):
        # averaging two equiprobable scenarios can only lower the optimum
        rng = np.random.default_rng(21)
        for _ in range(20):
            model = random_recourse_model(rng)
            space = random_discrete_space(rng, model, n_scenarios=2)
            h_mean = 0.5 * (space.hs[0] + space.hs[1])
            t_mean = 0.5 * (space.Ts[0] + space.Ts[1])
            one, _ = build_aggregated_master(model, [(1.0, h_mean, t_mean)])
            two, _ = build_aggregated_master(
                model, [(0.5, space.hs[0], space.Ts[0]), (0.5, space.hs[1], space.Ts[1])])
            v1 = lplib.solve(one).objective
            v2 = lplib.solve(two).objective
            assert v1 <= v2 + 1e-7 * (1.0 + abs(v2))

    def test_master_requires_positive_masses_summing_to_one(self):
        model = random_recourse_model(np.random.default_rng(3))
        h = np.zeros(model.m)
        with pytest.raises(ValidationError):
            build_aggregated_master(model, [(0.7, h, model.T_base)])
        with pytest.raises(ValidationError):
            build_aggregated_master(model, [(0.0, h, model.T_base),
                                            (1.0, h, model.T_base)])


class TestCellDuals:
    def test_extracted_duals_match_resolved_subproblems(self):
        rng = np.random.default_rng(11)
        hits = 0
        for _ in range(25):
            model = random_recourse_model(rng)
            space = random_discrete_space(rng, model, n_scenarios=3)
            triples = [(float(w), h, T)
                       for w, h, T in zip(space.weights, space.hs, space.Ts)]
            lp, cmap = build_aggregated_master(model, triples)
            sol = lplib.solve(lp)
            if sol.status != lplib.OPTIMAL:
                continue
            x = cmap.first_stage(sol)
            cell_duals = extract_cell_duals(sol, cmap)
            for k, (w, h, T) in enumerate(triples):
                out = evaluate_subproblem(model, x, model.realization(h=h, T=T))
                # master block value must price the same subproblem
                rhs = h - T @ x
                assert cell_duals[k] @ rhs == pytest.approx(out.value, abs=1e-6)
                hits += 1
        assert hits >= 30

    def test_tail_model_master_duals_within_cost_cap(self):
        model = tail_loss_model()
        cells = []
        for mass, returns in ((0.5, (0.09, 0.01)), (0.5, (-0.3, 0.12))):
            T = model.T_base.copy()
            T[0, :2] = returns
            cells.append((mass, model.h_base, T))
        lp, cmap = build_aggregated_master(model, cells)
        sol = lplib.solve(lp)
        assert sol.status == lplib.OPTIMAL
        for lam in extract_cell_duals(sol, cmap):
            assert -1e-9 <= lam[0] <= 1.0 + 1e-9


class TestAveragingLemmas:
    def test_averaged_primal_dual_and_mean_bound(self):
        rng = np.random.default_rng(33)
        for _ in range(30):
            model = random_recourse_model(rng)
            space = random_discrete_space(rng, model, n_scenarios=int(rng.integers(2, 7)))
            x = random_first_stage_point(rng, model)
            outs = [evaluate_subproblem(model, x, r) for r in space.realizations]
            w = space.weights
            y_bar = np.tensordot(w, [o.y for o in outs], axes=(0, 0))
            lam_bar = np.tensordot(w, [o.duals for o in outs], axes=(0, 0))
            h_bar = w @ space.hs
            t_bar = np.tensordot(w, space.Ts, axes=(0, 0))
            rhs = h_bar - t_bar @ x
            lhs = model.W @ y_bar
            for i, sense in enumerate(model.recourse_senses):
                if sense == "<=":
                    assert lhs[i] <= rhs[i] + 1e-7
                elif sense == ">=":
                    assert lhs[i] >= rhs[i] - 1e-7
                else:
                    assert lhs[i] == pytest.approx(rhs[i], abs=1e-7)
            assert np.all(model.W.T @ lam_bar <= model.q + 1e-7)
            mean_out = evaluate_subproblem(model, x, model.realization(h=h_bar, T=t_bar))
            expected = float(w @ [o.value for o in outs])
            assert mean_out.value <= expected + 1e-7
