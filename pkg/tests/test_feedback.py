import numpy as np
import pytest

from compsched import channel, feedback


def test_codebook_size_and_normalization():
    cb = feedback.gen_codebook(np.eye(2, dtype=complex), 4, 0)
    assert cb.entries.shape == (16, 2)
    assert np.allclose(np.linalg.norm(cb.entries, axis=1), 1.0)
    # unit vectors are not all aligned
    inner = np.abs(cb.entries @ cb.entries.conj().T)
    off = inner[~np.eye(16, dtype=bool)]
    assert off.mean() < 1.0


def test_codebook_reproducible_and_nested():
    corr = channel.single_bounce_correlation(0.3, np.deg2rad(15.0), 4)
    a = feedback.gen_codebook(corr, 4, 123)
    b = feedback.gen_codebook(corr, 4, 123)
    assert np.array_equal(a.entries, b.entries)
    small = feedback.gen_codebook(corr, 2, 123)
    assert np.allclose(small.entries, a.entries[:4])


def test_codebook_rank_one_entries_equal_up_to_phase():
    v = np.array([1.0, 1j]) / np.sqrt(2.0)
    corr = np.outer(v.conj(), v) * 2.0
    cb = feedback.gen_codebook(corr, 3, 7)
    ref = cb.entries[0]
    align = np.abs(cb.entries @ ref.conj())
    assert np.allclose(align, 1.0, atol=1e-10)


def test_codebook_rejects_zero_bits():
    with pytest.raises(ValueError):
        feedback.gen_codebook(np.eye(2, dtype=complex), 0, 1)


def test_correlated_codebook_reduces_distortion():
    # matched channels with small angular spread quantize better against a
    # codebook drawn from the same correlation than against an isotropic one
    corr = channel.single_bounce_correlation(0.5, np.deg2rad(15.0), 4)
    rng = np.random.default_rng(1)
    matched = feedback.gen_codebook(corr, 4, 11)
    isotropic = feedback.gen_codebook(np.eye(4, dtype=complex), 4, 11)
    err_m = []
    err_i = []
    for _ in range(10_000 // 100):
        draws = channel.sample_small_scale(corr, rng, size=100)
        dirs = draws / np.linalg.norm(draws, axis=1)[:, None]
        for cb, out in ((matched, err_m), (isotropic, err_i)):
            score = np.abs(dirs @ cb.entries.conj().T)
            out.append(1.0 - score.max(axis=1) ** 2)
    assert np.mean(np.concatenate(err_m)) < np.mean(np.concatenate(err_i))


def test_quantize_exact_hit_and_singleton():
    cb = feedback.gen_codebook(np.eye(3, dtype=complex), 3, 5)
    assert feedback.quantize(cb.entries[5], cb) == 5
    single = feedback.Codebook(entries=cb.entries[:1], bits=0)
    assert feedback.quantize(np.array([1.0, 0, 0], dtype=complex), single) == 0


def test_quantizer_direction_is_argmax_alignment():
    # the argmin-of-alignment reading would maximize distortion; the two
    # rules must differ measurably
    rng = np.random.default_rng(2)
    cb = feedback.gen_codebook(np.eye(2, dtype=complex), 4, 3)
    err_max = []
    err_min = []
    for _ in range(2000):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        score = np.abs(cb.entries @ v.conj())
        err_max.append(1.0 - score[np.argmax(score)] ** 2)
        err_min.append(1.0 - score[np.argmin(score)] ** 2)
        assert feedback.quantize(v, cb) == int(np.argmax(score))
    assert np.mean(err_max) < 0.2
    assert np.mean(err_min) > 0.5


def test_distortion_decreases_with_bits():
    rng = np.random.default_rng(3)
    dirs = rng.standard_normal((4000, 2)) + 1j * rng.standard_normal((4000, 2))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    means = []
    for bits in (1, 2, 4, 6, 8, 10, 12):
        cb = feedback.gen_codebook(np.eye(2, dtype=complex), bits, 17)
        score = np.abs(dirs @ cb.entries.conj().T).max(axis=1)
        means.append(float(np.mean(1.0 - score ** 2)))
    assert all(a >= b - 1e-12 for a, b in zip(means, means[1:]))
    assert means[-1] < 5e-3


def test_reconstruct_preserves_norms_and_hits():
    rng = np.random.default_rng(4)
    corr = np.eye(2, dtype=complex)
    cbs = [feedback.gen_codebook(corr, 4, 100 + m) for m in range(3)]
    sub = (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
    q = feedback.quantize_sublinks(sub, cbs)
    rec = feedback.reconstruct(q)
    for m in range(3):
        assert np.linalg.norm(rec[2 * m:2 * m + 2]) == pytest.approx(
            np.linalg.norm(sub[m]), rel=1e-12)
    # exact codebook hits reconstruct up to a per-sublink phase
    sub_hit = np.stack([2.0 * cbs[m].entries[3] for m in range(3)])
    q_hit = feedback.quantize_sublinks(sub_hit, cbs)
    rec_hit = feedback.reconstruct(q_hit)
    for m in range(3):
        a = rec_hit[2 * m:2 * m + 2]
        b = sub_hit[m]
        assert abs(abs(np.vdot(a, b)) - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-9


def test_reconstruct_zero_sublink():
    cbs = [feedback.gen_codebook(np.eye(2, dtype=complex), 2, 0)]
    q = feedback.quantize_sublinks(np.zeros((1, 2), dtype=complex), cbs)
    assert np.allclose(feedback.reconstruct(q), 0.0)


def test_codebook_bits_budget_arithmetic():
    # M=3, K=20, B_u=12, B_t=432
    assert feedback.codebook_bits("gus", 3, 20, 12, 12, 432) == 2
    assert feedback.codebook_bits("sus", 3, 20, 12, 12, 432) == 2
    assert feedback.codebook_bits("nus", 3, 20, 12, 12, 432) == 4
    assert feedback.codebook_bits("lus", 3, 20, 12, 12, 432) == 4
    assert feedback.codebook_bits("localnus", 3, 20, 12, 12, 432) == 4
    # per-user cap binds when the total budget is unlimited
    assert feedback.codebook_bits("nus", 3, 20, 12, 12, 10 ** 9) == 4
    with pytest.raises(ValueError):
        feedback.codebook_bits("gus", 3, 20, 12, 12, 100)
    with pytest.raises(ValueError):
        feedback.codebook_bits("nosuch", 3, 20, 12, 12, 432)


def test_slot_feedback_bits_expressions():
    m, k, bits = 3, 20, 4
    for l in (1, 5, 12):
        assert feedback.slot_feedback_bits("gus", m, k, l, bits) == m * m * k * bits
        assert feedback.slot_feedback_bits("sus", m, k, l, bits) == m * m * k * bits
        assert feedback.slot_feedback_bits("nus", m, k, l, bits) == m * l * bits
        assert feedback.slot_feedback_bits("lus", m, k, l, bits) == m * l * bits
        assert feedback.slot_feedback_bits("localnus", m, k, l, bits) == (m * k + m * l) * bits
