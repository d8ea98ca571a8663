"""Choi/link-product algebra and comb causality validation."""

import numpy as np
import pytest

from combsqec.combs import (
    ChoiOperator,
    CombSignature,
    choi_from_kraus,
    is_cptp,
    kraus_from_choi,
    link_product,
    random_cptp_choi,
    validate_comb,
)
from combsqec.tensor import (
    LabeledOperator,
    identity_operator,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    tensor_product,
)
from conftest import PAULI, op, random_kraus_set, random_matrix, rng_for


def kraus_op(mat, out_label, in_label, d_out=None, d_in=None):
    mat = np.asarray(mat, dtype=complex)
    d_out = d_out or mat.shape[0]
    d_in = d_in or mat.shape[1]
    return op(mat, [(out_label, d_out)], [(in_label, d_in)])


def literal_link(a: ChoiOperator, b: ChoiOperator) -> LabeledOperator:
    """The padded formula Tr_C((A^{T_C} (x) I_B)(I_A (x) B)), built literally."""
    shared = sorted(set(a.labels) & set(b.labels))
    a_only = [l for l in a.labels if l not in shared]
    b_only = [l for l in b.labels if l not in shared]
    order = a_only + shared + b_only

    a_t = partial_transpose(a.op, shared) if shared else a.op
    pad_b = [(l, b.dim_of(l)) for l in b_only]
    pad_a = [(l, a.dim_of(l)) for l in a_only]
    left = a_t if not pad_b else tensor_product(a_t, identity_operator(pad_b))
    right = b.op if not pad_a else tensor_product(identity_operator(pad_a), b.op)
    left = permute_subsystems(left, order)
    right = permute_subsystems(right, order)
    product = LabeledOperator(left.row_subsystems, right.col_subsystems, left.data @ right.data)
    return partial_trace(product, shared) if shared else product


class TestChoiFromKraus:
    def test_identity_kraus(self):
        choi = choi_from_kraus([kraus_op(np.eye(2), "out", "in")])
        expected = np.zeros((4, 4))
        for i in (0, 3):
            for j in (0, 3):
                expected[i, j] = 1
        np.testing.assert_allclose(choi.op.data, expected)
        assert choi.output_labels == ("out",) and choi.input_labels == ("in",)

    def test_depolarizing_is_maximally_mixed(self):
        kraus = [kraus_op(PAULI[s] / 2, "out", "in") for s in "IXYZ"]
        choi = choi_from_kraus(kraus)
        np.testing.assert_allclose(choi.op.data, np.eye(4) / 2, atol=1e-14)

    def test_trace_equals_sum_of_kraus_norms(self):
        p = 0.3
        kraus = [
            kraus_op(np.sqrt(1 - p) * np.eye(2), "out", "in"),
            kraus_op(np.sqrt(p) * PAULI["X"], "out", "in"),
        ]
        choi = choi_from_kraus(kraus)
        assert choi.op.trace().real == pytest.approx(2.0, abs=1e-12)

    def test_mixed_signatures_rejected(self):
        with pytest.raises(ValueError, match="mixed Kraus signatures"):
            choi_from_kraus(
                [kraus_op(np.eye(2), "out", "in"), kraus_op(np.eye(2), "o2", "in")]
            )


class TestKrausFromChoi:
    def test_identity_choi_single_kraus(self):
        choi = choi_from_kraus([kraus_op(np.eye(2), "out", "in")])
        kraus = kraus_from_choi(choi)
        assert len(kraus) == 1
        k = kraus[0].data
        np.testing.assert_allclose(k.conj().T @ k, np.eye(2), atol=1e-12)
        assert abs(abs(k[0, 0]) - 1) < 1e-12

    def test_maximally_mixed_choi(self):
        subs = (("out", 2), ("in", 2))
        choi = ChoiOperator(
            LabeledOperator(subs, subs, np.eye(4) / 2), ("in",), ("out",)
        )
        kraus = kraus_from_choi(choi)
        assert len(kraus) == 4
        for k in kraus:
            assert np.trace(k.data.conj().T @ k.data).real == pytest.approx(0.5)

    def test_roundtrip_random_psd(self):
        rng = rng_for(21)
        g = random_matrix(rng, 9, 9)
        mat = g @ g.conj().T
        subs = (("out", 3), ("in", 3))
        choi = ChoiOperator(LabeledOperator(subs, subs, mat), ("in",), ("out",))
        rebuilt = choi_from_kraus(kraus_from_choi(choi))
        assert np.linalg.norm(rebuilt.op.data - mat) <= 1e-9 * np.linalg.norm(mat)


class TestLinkProduct:
    def test_disjoint_labels_is_tensor_product(self):
        rng = rng_for(22)
        a = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "a_out", "a_in")])
        b = choi_from_kraus([kraus_op(random_matrix(rng, 3, 3), "b_out", "b_in")])
        linked = link_product(a, b)
        direct = tensor_product(a.op, b.op)
        aligned = permute_subsystems(direct, linked.op.row_labels)
        np.testing.assert_allclose(linked.op.data, aligned.data, atol=1e-12)

    def test_full_overlap_is_trace_inner_product(self):
        rng = rng_for(23)
        a = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "x", "y")])
        b = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "x", "y")])
        linked = link_product(a, b)
        assert linked.op.data.shape == (1, 1)
        expected = np.trace(a.op.data.T @ b.op.data)
        assert linked.op.data[0, 0] == pytest.approx(expected, rel=1e-10)

    def test_channel_composition_100_random_pairs(self):
        rng = rng_for(24)
        for _ in range(100):
            k1 = [kraus_op(m, "b", "a") for m in random_kraus_set(rng, 2, 2, 2)]
            k2 = [kraus_op(m, "c", "b") for m in random_kraus_set(rng, 2, 2, 2)]
            composed = [
                kraus_op(m2.data @ m1.data, "c", "a") for m2 in k2 for m1 in k1
            ]
            lhs = link_product(choi_from_kraus(k2), choi_from_kraus(k1))
            rhs = choi_from_kraus(composed)
            aligned = permute_subsystems(rhs.op, lhs.op.row_labels)
            assert np.linalg.norm(lhs.op.data - aligned.data) <= 1e-9

    def test_matches_literal_padded_formula_partial_overlap(self):
        rng = rng_for(25)
        for _ in range(20):
            a = choi_from_kraus(
                [
                    LabeledOperator(
                        (("p", 2), ("q", 2)), (("r", 2),), random_matrix(rng, 4, 2)
                    )
                ]
            )
            b = choi_from_kraus(
                [
                    LabeledOperator(
                        (("s", 3),), (("q", 2),), random_matrix(rng, 3, 2)
                    )
                ]
            )
            linked = link_product(a, b)
            literal = literal_link(a, b)
            aligned = permute_subsystems(literal, linked.op.row_labels)
            np.testing.assert_allclose(linked.op.data, aligned.data, atol=1e-10)

    def test_commutes_up_to_permutation(self):
        rng = rng_for(26)
        a = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "u", "v")])
        b = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "w", "v")])
        ab = link_product(a, b)
        ba = link_product(b, a)
        aligned = permute_subsystems(ba.op, ab.op.row_labels)
        np.testing.assert_allclose(ab.op.data, aligned.data, atol=1e-10)

    def test_associative_on_chain(self):
        rng = rng_for(27)
        a = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "b", "a")])
        bc = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "c", "b")])
        c = choi_from_kraus([kraus_op(random_matrix(rng, 2, 2), "d", "c")])
        left = link_product(link_product(c, bc), a)
        right = link_product(c, link_product(bc, a))
        aligned = permute_subsystems(right.op, left.op.row_labels)
        assert np.linalg.norm(left.op.data - aligned.data) <= 1e-9

    def test_dim_mismatch_rejected(self):
        a = choi_from_kraus([kraus_op(np.eye(2), "x", "y")])
        b = choi_from_kraus([kraus_op(np.zeros((3, 3)), "x", "z", 3, 3)])
        with pytest.raises(ValueError, match="shared label 'x'"):
            link_product(a, b)


class TestIsCptp:
    def test_identity_choi(self):
        report = is_cptp(choi_from_kraus([kraus_op(np.eye(2), "out", "in")]))
        assert report.cp and report.tp

    def test_scaled_choi_not_tp(self):
        choi = choi_from_kraus([kraus_op(np.sqrt(2) * np.eye(2), "out", "in")])
        report = is_cptp(choi)
        assert report.cp and not report.tp
        assert report.tp_residual > 1

    def test_dephasing_channel(self):
        kraus = [
            kraus_op(np.sqrt(0.7) * np.eye(2), "out", "in"),
            kraus_op(np.sqrt(0.3) * PAULI["Z"], "out", "in"),
        ]
        report = is_cptp(choi_from_kraus(kraus))
        assert report.cp and report.tp
        assert report.residual <= 1e-12


class TestValidateComb:
    def _chain(self, kraus_by_round):
        factors = [
            choi_from_kraus([kraus_op(m, f"o{r}", f"i{r}") for m in mats])
            for r, mats in enumerate(kraus_by_round, start=1)
        ]
        total = factors[0]
        for f in factors[1:]:
            total = link_product(total, f)
        sig = CombSignature(
            tuple((f"i{r}", f"o{r}") for r in range(1, len(kraus_by_round) + 1))
        )
        return total, sig

    def test_identity_chain_valid(self):
        total, sig = self._chain([[np.eye(2)], [np.eye(2)], [np.eye(2)]])
        report = validate_comb(total, sig)
        assert report.valid and report.first_violation is None
        assert all(r <= 1e-12 for r in report.level_residuals)
        assert report.normalization == pytest.approx(1.0)

    def test_random_cptp_chain_valid(self):
        rng = rng_for(28)
        total, sig = self._chain(
            [random_kraus_set(rng, 2, 2, 3), random_kraus_set(rng, 2, 2, 2)]
        )
        report = validate_comb(total, sig)
        assert report.valid
        assert max(report.level_residuals) <= 1e-8
        assert report.normalization == pytest.approx(1.0, abs=1e-10)

    def test_non_tp_round_flagged(self):
        gamma = 0.4
        damp_incomplete = [np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)]
        total, sig = self._chain([[np.eye(2)], damp_incomplete, [np.eye(2)]])
        report = validate_comb(total, sig)
        assert not report.valid
        assert report.first_violation == 2
        assert report.level_residuals[0] <= 1e-10
        assert report.level_residuals[2] <= 1e-10

    def test_signature_label_mismatch_rejected(self):
        total, sig = self._chain([[np.eye(2)]])
        bad = CombSignature((("i1", "nope"),))
        with pytest.raises(ValueError, match="do not match"):
            validate_comb(total, bad)


class TestRandomCptp:
    def test_output_is_cptp(self):
        rng = rng_for(29)
        choi = random_cptp_choi(rng, [("out", 3)], [("in", 2)])
        report = is_cptp(choi)
        assert report.cp and report.tp
        assert report.residual <= 1e-8

    def test_deterministic_per_seed(self):
        a = random_cptp_choi(rng_for(30), [("out", 2)], [("in", 2)])
        b = random_cptp_choi(rng_for(30), [("out", 2)], [("in", 2)])
        np.testing.assert_array_equal(a.op.data, b.op.data)


class TestChoiValidation:
    def test_partition_must_cover_labels(self):
        subs = (("a", 2), ("b", 2))
        mat = np.eye(4)
        with pytest.raises(ValueError, match="partition"):
            ChoiOperator(LabeledOperator(subs, subs, mat), ("a",), ())

    def test_overlapping_partition_rejected(self):
        subs = (("a", 2),)
        with pytest.raises(ValueError, match="both an input and an output"):
            ChoiOperator(LabeledOperator(subs, subs, np.eye(2)), ("a",), ("a",))

    def test_negative_operator_rejected(self):
        subs = (("a", 2),)
        with pytest.raises(ValueError, match="not PSD"):
            ChoiOperator(LabeledOperator(subs, subs, -np.eye(2)), ("a",), ())

    def test_signature_unique_labels(self):
        with pytest.raises(ValueError, match="unique"):
            CombSignature((("a", "b"), ("b", "c")))
