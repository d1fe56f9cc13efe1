import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levyquant import amplitude as A
from levyquant.noise_models import (ACClassParams, GaussianLK, LevyMeasure, LevyTriplet,
                                    PoissonParams, StableParams, Sum, X0Classification,
                                    classify_model, classify_x0, decompose_finite,
                                    discrete_fraction, gaussian_exponent, is_degenerate,
                                    levy_khintchine_exponent, model_from_dict, model_from_json,
                                    model_hash, model_to_dict, model_to_json, poisson_exponent,
                                    poisson_triplet, stable_exponent)

UNIT_ATOM = LevyMeasure(atoms=((1.0, 1.0),))
UNIFORM_AC2 = LevyMeasure(ac_law=A.uniform(0.0, 1.0), ac_mass=2.0)


class TestConstruction:
    def test_singular_part_rejected(self):
        with pytest.raises(ValueError):
            LevyMeasure(cs_mass=0.5)

    @pytest.mark.parametrize("atoms", [((0.0, 1.0),), ((1.0, -1.0),), ((1.0, 1.0), (1.0, 2.0)),
                                       ((math.inf, 1.0),)])
    def test_bad_atoms(self, atoms):
        with pytest.raises(ValueError):
            LevyMeasure(atoms=atoms)

    def test_ac_mass_needs_continuous_law(self):
        with pytest.raises(ValueError):
            LevyMeasure(ac_law=A.point(1.0), ac_mass=1.0)

    @pytest.mark.parametrize("kwargs", [dict(alpha=0.0), dict(alpha=2.5), dict(alpha=1.5, beta=1.5),
                                        dict(alpha=1.5, sigma=0.0)])
    def test_stable_ranges(self, kwargs):
        with pytest.raises(ValueError):
            StableParams(**kwargs)

    def test_alpha_two_canonical_beta(self):
        assert StableParams(2.0, 0.7) == StableParams(2.0, 0.0)

    @pytest.mark.parametrize("field", ["alpha", "ell", "v"])
    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf])
    def test_ac_class_positive(self, field, bad):
        kw = dict(alpha=1.0, ell=1.0, v=1.0)
        kw[field] = bad
        with pytest.raises(ValueError):
            ACClassParams(**kw)

    def test_poisson_rate(self):
        with pytest.raises(ValueError):
            PoissonParams(0.0, A.uniform())
        with pytest.raises(ValueError):
            PoissonParams(math.inf, A.uniform())

    def test_gaussian_sigma(self):
        with pytest.raises(ValueError):
            GaussianLK(0.0)


class TestClassification:
    def test_gaussian_part_is_continuous(self):
        assert classify_x0(LevyTriplet(0.0, 1.0)) == X0Classification.CONTINUOUS

    def test_atomic_is_discrete(self):
        assert classify_x0(LevyTriplet(0.0, 0.0, UNIT_ATOM)) == X0Classification.DISCRETE

    def test_ac_is_discrete_continuous(self):
        assert classify_x0(LevyTriplet(0.0, 0.0, UNIFORM_AC2)) == X0Classification.DISCRETE_CONTINUOUS

    def test_zero_triplet_is_discrete(self):
        assert classify_x0(LevyTriplet()) == X0Classification.DISCRETE

    @pytest.mark.parametrize("triplet", [LevyTriplet(0.3, 1.0), LevyTriplet(0.0, 0.0, UNIT_ATOM),
                                         LevyTriplet(1.0, 0.0, UNIFORM_AC2),
                                         LevyTriplet(0.0, 2.0, UNIFORM_AC2)])
    @pytest.mark.parametrize("n", [1, 2, 7, 64])
    def test_invariant_under_window_scaling(self, triplet, n):
        assert classify_x0(triplet.scaled(1 / n)) == classify_x0(triplet)

    def test_models(self, cauchy, gaussian, poisson_uniform, sum_model):
        assert classify_model(cauchy) == X0Classification.CONTINUOUS
        assert classify_model(gaussian) == X0Classification.CONTINUOUS
        assert classify_model(sum_model) == X0Classification.CONTINUOUS
        assert classify_model(poisson_uniform) == X0Classification.DISCRETE_CONTINUOUS
        assert classify_model(PoissonParams(1.0, A.point(1.0))) == X0Classification.DISCRETE

    def test_degenerate(self, poisson_uniform):
        assert is_degenerate(PoissonParams(1.0, A.point(0.0)))
        assert not is_degenerate(poisson_uniform)


class TestExponents:
    def test_alpha_two(self):
        assert stable_exponent(StableParams(2.0, 0.9, 1.0), 1.0) == pytest.approx(-1 + 0j)

    @pytest.mark.parametrize("p", [StableParams(1.0, 0.5, 2.0, 1.0), StableParams(0.7, -1.0),
                                   StableParams(1.5, 0.3, 0.5, -2.0)])
    def test_zero_frequency(self, p):
        assert stable_exponent(p, 0.0) == 0

    def test_cauchy(self):
        assert stable_exponent(StableParams(1.0), 2.0) == pytest.approx(-2 + 0j)

    @given(st.floats(0.1, 2.0), st.floats(-1, 1), st.floats(0.1, 5), st.floats(-50, 50))
    def test_hermitian(self, alpha, beta, sigma, w):
        p = StableParams(alpha, beta, sigma, 0.0)
        a, b = stable_exponent(p, w), stable_exponent(p, -w)
        assert a == pytest.approx(np.conj(b), rel=1e-12, abs=1e-12)

    def test_alpha_one_log_branch(self):
        p = StableParams(1.0, 1.0, 1.0)
        w = math.e
        expected = -w * (1 - 1j * (-2 / math.pi) * math.log(w))
        assert stable_exponent(p, w) == pytest.approx(expected)

    def test_poisson_point_mass(self):
        assert poisson_exponent(PoissonParams(1.0, A.point(1.0)), math.pi) == pytest.approx(-2 + 0j, abs=1e-12)

    def test_poisson_zero(self, poisson_uniform):
        assert poisson_exponent(poisson_uniform, 0.0) == 0

    def test_poisson_uniform_linear_term(self):
        p = PoissonParams(2.0, A.uniform(0.0, 1.0))
        w = 1e-5
        assert (poisson_exponent(p, w) / w).imag == pytest.approx(1.0, rel=1e-6)

    def test_poisson_without_cf(self):
        law = A.custom(sampler=lambda g, n: g.uniform(size=n))
        with pytest.raises(ValueError):
            poisson_exponent(PoissonParams(1.0, law), 1.0)

    def test_gaussian(self):
        assert gaussian_exponent(GaussianLK(2.0, 1.0), 1.0) == pytest.approx(-2 + 1j)


class TestDecomposition:
    def test_atom_outside_unit_interval(self):
        p, mu = decompose_finite(LevyTriplet(0.0, 0.0, LevyMeasure(atoms=((2.0, 1.0),))))
        assert p.rate == 1.0 and p.amplitude.atoms == ((2.0, 1.0),) and mu == 0.0

    def test_atom_inside_unit_interval(self):
        p, mu = decompose_finite(LevyTriplet(0.0, 0.0, LevyMeasure(atoms=((0.5, 1.0),))))
        assert p.rate == 1.0 and p.amplitude.atoms == ((0.5, 1.0),)
        assert mu == pytest.approx(-0.5)

    def test_uniform_ac(self):
        p, mu = decompose_finite(LevyTriplet(1.0, 0.0, UNIFORM_AC2))
        assert p.rate == 2.0 and mu == pytest.approx(0.0, abs=1e-12)
        assert p.amplitude.pdf(np.array([0.5]))[0] == pytest.approx(1.0)

    def test_atom_on_boundary_not_compensated(self):
        _, mu = decompose_finite(LevyTriplet(0.0, 0.0, LevyMeasure(atoms=((1.0, 3.0),))))
        assert mu == 0.0

    @pytest.mark.parametrize("triplet", [LevyTriplet(0.0, 1.0, UNIT_ATOM), LevyTriplet()])
    def test_rejects(self, triplet):
        with pytest.raises(ValueError):
            decompose_finite(triplet)

    @pytest.mark.parametrize("triplet", [
        LevyTriplet(0.3, 0.0, LevyMeasure(atoms=((0.5, 1.0), (-2.0, 0.5)))),
        LevyTriplet(1.0, 0.0, UNIFORM_AC2),
        LevyTriplet(-0.2, 0.0, LevyMeasure(atoms=((0.25, 0.4),), ac_law=A.normal(0.0, 1.0), ac_mass=1.5)),
    ])
    def test_reproduces_exponent(self, triplet):
        w = np.linspace(-6, 6, 13)
        p, mu = decompose_finite(triplet)
        lhs = poisson_exponent(p, w) + 1j * w * mu
        rhs = levy_khintchine_exponent(triplet, w)
        np.testing.assert_allclose(lhs, rhs, atol=1e-7)

    def test_poisson_triplet_round_trip(self, poisson_uniform):
        w = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(levy_khintchine_exponent(poisson_triplet(poisson_uniform), w),
                                   poisson_exponent(poisson_uniform, w), atol=1e-8)


class TestDiscreteFraction:
    def test_atomic(self):
        assert discrete_fraction(UNIT_ATOM) == 1.0

    def test_ac(self):
        assert discrete_fraction(UNIFORM_AC2) == 0.0

    def test_mixed(self):
        m = LevyMeasure(atoms=((1.0, 1.0),), ac_law=A.uniform(), ac_mass=3.0)
        assert discrete_fraction(m) == 0.25
        p, _ = decompose_finite(LevyTriplet(0.0, 0.0, m))
        assert p.amplitude.discrete_fraction == pytest.approx(0.25)

    def test_zero_mass(self):
        with pytest.raises(ValueError):
            discrete_fraction(LevyMeasure())


class TestSerialization:
    @pytest.mark.parametrize("model", [
        StableParams(1.5, 0.25, 2.0, -1.0), GaussianLK(0.5, 0.1),
        PoissonParams(2.0, A.uniform(-1.0, 3.0)),
        PoissonParams(1.0, A.discrete([1.0, -2.0], [0.25, 0.75]), (1.0, 1.75)),
        PoissonParams(1.0, A.mixture([A.point(0.0), A.normal(0.0, 2.0)], [0.5, 0.5])),
        Sum(StableParams(1.0), PoissonParams(1.0, A.uniform())),
    ])
    def test_round_trip(self, model):
        d = model_to_dict(model)
        assert json.loads(json.dumps(d)) == d
        back = model_from_json(model_to_json(model))
        assert model_to_dict(back) == d
        assert model_hash(back) == model_hash(model)

    def test_degenerate_kind(self):
        assert is_degenerate(model_from_dict({"kind": "degenerate"}))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            model_from_dict({"kind": "brownian"})

    def test_hash_distinguishes(self):
        assert model_hash(StableParams(1.0)) != model_hash(StableParams(1.5))
