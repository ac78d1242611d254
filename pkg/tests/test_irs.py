import numpy as np
import pytest

from irsnoma import kernels
from irsnoma.channel import (ChannelRealization, ClusterGeometry, LinkBudget, StreamKey,
                             build_one_ring_covariance, draw_channel)
from irsnoma.irs import (IrsSetting, QclsProblem, build_subproblems, interference_residual,
                         khatri_rao, kkt_residual, optimize_user_irs, solve_qcls,
                         solve_qcls_reference)

from oracles import crandn, interference_blocks_dense, project_gradient_oracle

PAIRS = ("vv", "vh", "hv", "hh")


def random_real(rng, L=3, n2=2, r=2, cross=1.0):
    D = {pq: crandn(rng, r, n2) * (np.sqrt(cross) if pq[0] != pq[1] else 1) for pq in PAIRS}
    G = {pq: crandn(rng, L, r) * (np.sqrt(cross) if pq[0] != pq[1] else 1) for pq in PAIRS}
    S = {pp: crandn(rng, L, n2) for pp in ("vv", "hh")}
    return ChannelRealization(D=D, G=G, S=S)


def random_irs(rng, L):
    th = {pq: crandn(rng, L) for pq in ("vv", "hv", "vh", "hh")}
    return th, IrsSetting(theta_vv=th["vv"], theta_hv=th["hv"], theta_vh=th["vh"], theta_hh=th["hh"])


def test_khatri_rao_scalar_and_columns():
    A = np.array([[2.0 + 1j]])
    B = np.array([[3.0 - 2j]])
    assert khatri_rao(A, B)[0, 0] == (2.0 + 1j) * (3.0 - 2j)
    rng = np.random.default_rng(0)
    A, B = crandn(rng, 3, 4), crandn(rng, 2, 4)
    KR = khatri_rao(A, B)
    for l in range(4):
        assert np.allclose(KR[:, l], np.kron(A[:, l], B[:, l]))
    with pytest.raises(ValueError):
        khatri_rao(A, crandn(rng, 2, 3))


def test_scalar_subproblem_by_hand():
    rng = np.random.default_rng(1)
    real = random_real(rng, L=1, n2=1, r=1)
    p_v, p_h = build_subproblems(real, "v")
    s_bar = real.S["vv"][0, 0].conjugate()
    assert np.isclose(p_v.K_mat[0, 0], real.G["hv"][0, 0] * s_bar)
    assert np.isclose(p_v.K_mat[0, 1], real.G["hh"][0, 0] * s_bar)
    assert np.isclose(p_v.d_vec[0], real.D["hv"][0, 0].conjugate())
    assert np.isclose(p_h.d_vec[0], real.D["hh"][0, 0].conjugate())


@pytest.mark.parametrize("pol", ["v", "h"])
def test_vectorization_matches_dense_blocks(pol):
    rng = np.random.default_rng(2)
    t = "h" if pol == "v" else "v"
    for _ in range(30):
        real = random_real(rng)
        th, irs = random_irs(rng, 3)
        problems = build_subproblems(real, pol)
        dense = interference_blocks_dense(real.D, real.G, real.S, th, t)
        for q, p, M in zip("vh", problems, dense):
            x = np.concatenate([th["v" + q], th["h" + q]])
            assert p.K_mat.shape == (2 * 2, 2 * 3)
            assert np.allclose(p.K_mat @ x + p.d_vec, M.T.ravel(), atol=1e-12)
        tot = sum(np.linalg.norm(M) ** 2 for M in dense)
        assert np.isclose(interference_residual(real, irs, pol), tot, rtol=1e-12)


def test_horizontal_user_is_vh_swap_of_vertical():
    rng = np.random.default_rng(3)
    real = random_real(rng)
    swap = {"vv": "hh", "hh": "vv", "vh": "hv", "hv": "vh"}
    mirrored = ChannelRealization(D={swap[k]: v for k, v in real.D.items()},
                                  G={swap[k]: v for k, v in real.G.items()},
                                  S={swap[k]: v for k, v in real.S.items()})
    pv = build_subproblems(real, "v")
    ph = build_subproblems(mirrored, "h")
    # vertical user's rx-v problem <-> horizontal user's rx-h problem, variables swapped
    for a, b in ((pv[0], ph[1]), (pv[1], ph[0])):
        L = a.K_mat.shape[1] // 2
        assert np.allclose(a.d_vec, b.d_vec)
        assert np.allclose(a.K_mat[:, :L], b.K_mat[:, L:])
        assert np.allclose(a.K_mat[:, L:], b.K_mat[:, :L])


def test_no_leakage_gives_zero():
    rng = np.random.default_rng(4)
    real = random_real(rng, cross=0.0)
    irs, reps = optimize_user_irs(real, "v")
    # for a vertical user the rx-v problem is fully zero; rx-h needs nulling of D^hh
    assert reps[0].objective_value == 0.0
    assert np.allclose(irs.theta_vv, 0) and np.allclose(irs.theta_hv, 0)


def test_zero_offset_gives_zero_solution():
    rng = np.random.default_rng(5)
    p = QclsProblem(K_mat=crandn(rng, 4, 6), d_vec=np.zeros(4, complex))
    theta, rep = solve_qcls(p)
    assert np.allclose(theta, 0) and rep.objective_value == 0.0


def test_separable_clipping_example():
    p = QclsProblem(K_mat=np.eye(2, dtype=complex), d_vec=np.array([-3.0, -0.5], dtype=complex))
    theta, rep = solve_qcls(p)
    assert np.allclose(theta, [1.0, 0.5], atol=1e-8)
    assert np.isclose(rep.objective_value, 4.0, atol=1e-8)
    assert rep.active_constraints == [0]
    # grid search over the two disks agrees
    r = np.linspace(0, 1, 201)
    ph = np.linspace(0, 2 * np.pi, 361)
    z = (r[:, None] * np.exp(1j * ph[None, :])).ravel()
    best = np.abs(z - 3.0).min() ** 2 + np.abs(z - 0.5).min() ** 2
    assert abs(best - 4.0) < 1e-3


def _random_problem(rng, m, n, scale):
    K = crandn(rng, m, n)
    d = crandn(rng, m) * scale
    return QclsProblem(K_mat=K, d_vec=d)


def test_matches_projected_gradient_oracle():
    rng = np.random.default_rng(6)
    for i in range(40):
        n = int(rng.integers(1, 5)) * 2
        m = int(rng.integers(1, 9))
        p = _random_problem(rng, m, n, scale=rng.choice([0.3, 3.0, 10.0]))
        theta, rep = solve_qcls(p)
        ref = project_gradient_oracle(p.K_mat, p.d_vec)
        f_ref = np.linalg.norm(p.K_mat @ ref + p.d_vec) ** 2
        assert rep.objective_value <= f_ref * (1 + 1e-6) + 1e-12
        assert abs(rep.objective_value - f_ref) <= 1e-6 * max(f_ref, 1e-12) + 1e-12
        assert np.abs(theta).max() <= 1 + 1e-9
        assert rep.kkt_residual <= 1e-6


def test_matches_internal_reference_solver():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = _random_problem(rng, 6, 8, 4.0)
        _, rep = solve_qcls(p)
        _, ref = solve_qcls_reference(p)
        assert ref.converged
        assert abs(rep.objective_value - ref.objective_value) <= 1e-6 * ref.objective_value + 1e-12


def test_matches_conic_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(8)
    for _ in range(5):
        p = _random_problem(rng, 6, 8, 3.0)
        _, rep = solve_qcls(p)
        x = cp.Variable(8, complex=True)
        prob = cp.Problem(cp.Minimize(cp.sum_squares(p.K_mat @ x + p.d_vec)), [cp.abs(x) <= 1])
        prob.solve()
        assert rep.objective_value <= prob.value * (1 + 1e-5) + 1e-8


def test_kkt_conditions_at_solution():
    rng = np.random.default_rng(9)
    p = _random_problem(rng, 12, 10, 6.0)
    theta, rep = solve_qcls(p, tol=1e-10)
    assert rep.converged and rep.active_constraints
    g = p.gradient(theta)
    for l in range(theta.size):
        if l in rep.active_constraints:
            # gradient is a nonpositive multiple of theta_l
            assert abs(np.imag(g[l] * np.conj(theta[l]))) <= 1e-8
            assert np.real(g[l] * np.conj(theta[l])) <= 1e-8
        else:
            assert abs(g[l]) <= 1e-8
    assert kkt_residual(p, theta) == rep.kkt_residual


def test_feasible_least_squares_shortcut():
    rng = np.random.default_rng(10)
    p = _random_problem(rng, 3, 20, 0.05)
    theta, rep = solve_qcls(p)
    assert rep.method == "least_squares"
    assert rep.objective_value < 1e-20


def test_iteration_limit_is_flagged():
    rng = np.random.default_rng(11)
    p = _random_problem(rng, 30, 40, 50.0)
    theta, rep = solve_qcls(p, tol=1e-14, max_iter=2)
    assert not rep.converged and rep.iterations == 2
    assert np.abs(theta).max() <= 1 + 1e-9


def test_bad_tolerance():
    with pytest.raises(ValueError):
        solve_qcls(QclsProblem(K_mat=np.eye(2, dtype=complex), d_vec=np.ones(2, complex)), tol=0)


def test_objective_is_convex_along_segments():
    rng = np.random.default_rng(12)
    p = _random_problem(rng, 5, 6, 2.0)
    for _ in range(50):
        a = kernels.project_disk(crandn(rng, 6) * 2)
        b = kernels.project_disk(crandn(rng, 6) * 2)
        fa, fb = p.objective(a), p.objective(b)
        for s in np.linspace(0, 1, 11):
            assert p.objective((1 - s) * a + s * b) <= (1 - s) * fa + s * fb + 1e-9
    w = np.linalg.eigvalsh(p.C_mat)
    assert w.min() >= -1e-10 * np.trace(p.C_mat).real


def _scenario_real(L, trial, seed=3):
    m = build_one_ring_covariance(ClusterGeometry(azimuth_deg=30.0), 12, 0.5)
    b = LinkBudget.from_distances(115.0, 20.0, 0.5, 0.5)
    return draw_channel(m, b, 4, L, StreamKey(seed=seed, trial=trial))


def test_empty_surface_leaves_direct_leakage():
    real = _scenario_real(0, 0)
    irs, reps = optimize_user_irs(real, "v")
    expected = np.linalg.norm(real.D["hv"]) ** 2 + np.linalg.norm(real.D["hh"]) ** 2
    assert np.isclose(sum(r.objective_value for r in reps), expected, rtol=1e-12)
    assert irs.n_elements == 0 and irs.max_modulus() == 0.0


def test_residual_equals_sum_of_objectives():
    real = _scenario_real(16, 1)
    for pol in "vh":
        irs, reps = optimize_user_irs(real, pol)
        assert np.isclose(interference_residual(real, irs, pol),
                          sum(r.objective_value for r in reps), rtol=1e-9)
        assert irs.max_modulus() <= 1 + 1e-9


def test_more_elements_never_hurt():
    means = []
    for L in (8, 16, 32):
        tot = 0.0
        for t in range(100):
            full = _scenario_real(32, t)
            real = full.truncated(L)
            _, reps = optimize_user_irs(real, "v")
            tot += sum(r.objective_value for r in reps)
        means.append(tot / 100)
    assert means[0] > means[1] > means[2]


def test_nested_instances_monotone():
    for t in range(10):
        full = _scenario_real(24, t, seed=21)
        prev = np.inf
        for L in (0, 4, 8, 16, 24):
            _, reps = optimize_user_irs(full.truncated(L), "h", tol=1e-10)
            obj = sum(r.objective_value for r in reps)
            assert obj <= prev * (1 + 1e-7) + 1e-12
            prev = obj


def test_irs_matrix_layout():
    rng = np.random.default_rng(13)
    th, irs = random_irs(rng, 3)
    T = irs.matrix()
    assert np.allclose(np.diag(T[:3, :3]), th["vv"])
    assert np.allclose(np.diag(T[:3, 3:]), th["hv"])
    assert np.allclose(np.diag(T[3:, :3]), th["vh"])
    assert np.allclose(np.diag(T[3:, 3:]), th["hh"])
