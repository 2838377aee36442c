"""Independent reference computations used by the tests."""
import numpy as np


def single_contact_objective(D, sigma, lam):
    """Kinetic-energy objective of one contact: v^T D^-1 v / 2 with v = sigma + D lam."""
    v = sigma + D @ lam
    return 0.5 * float(v @ np.linalg.solve(D, v))


def brute_force_single_contact(D, sigma, mu, n_side=100, levels=8, shrink=0.1):
    """Grid minimum of the contact objective over feasible impulses.

    Feasible impulses are ``lam = 0`` plus every tangential impulse whose
    normal impulse (chosen so the normal velocity vanishes) is nonnegative and
    whose tangential part lies in the cone.  Each level evaluates an
    ``n_side x n_side`` grid (10^4 points) of tangential impulses, then zooms
    onto the best point.
    """
    Dnn = D[2, 2]

    def normal(lt):
        return -(sigma[2] + lt @ D[2, :2]) / Dnn

    best_lam = np.zeros(3)
    best = single_contact_objective(D, sigma, best_lam) if sigma[2] >= 0 else np.inf
    # an upper bound on the tangential impulse: largest cone radius over the normal range
    lam_n_max = -sigma[2] / Dnn if sigma[2] < 0 else 0.0
    radius = 4.0 * mu * max(lam_n_max, 1e-12) + 1e-12
    center = np.zeros(2)
    for _ in range(levels):
        xs = np.linspace(center[0] - radius, center[0] + radius, n_side)
        ys = np.linspace(center[1] - radius, center[1] + radius, n_side)
        X, Y = np.meshgrid(xs, ys)
        lt = np.column_stack([X.ravel(), Y.ravel()])
        ln = normal(lt)
        ok = (ln >= 0) & (np.hypot(lt[:, 0], lt[:, 1]) <= mu * ln)
        if not ok.any():
            radius *= 0.5
            continue
        lam = np.column_stack([lt[ok], ln[ok]])
        v = sigma + lam @ D.T
        f = 0.5 * np.einsum("ij,ij->i", v, np.linalg.solve(D, v.T).T)
        i = int(np.argmin(f))
        if f[i] < best:
            best, best_lam = float(f[i]), lam[i]
            center = lam[i, :2]
        radius *= shrink * 2
    return best, best_lam


def complementarity_residuals(solution, mu):
    lam, v = solution.impulses, solution.velocities
    normal = np.abs(np.minimum(lam[:, 2], v[:, 2]))
    speed = np.hypot(v[:, 0], v[:, 1])
    tangential = np.abs(speed * (mu**2 * lam[:, 2] ** 2 - np.sum(lam[:, :2] ** 2, axis=1)))
    return normal, tangential


def random_spd(rng, n=3, coupling=0.3):
    G = rng.normal(size=(n, n))
    return coupling * G @ G.T / n + np.eye(n) * rng.uniform(0.3, 1.5)


def single_contact_fixtures():
    """(name, D, sigma, mu) cases: sliding, sticking, oblique and coupled random blocks."""
    rng = np.random.default_rng(11)
    out = [
        ("point-mass-slide", np.eye(3), np.array([1.0, 0.0, -0.0981]), 0.19),
        ("point-mass-stick", np.eye(3), np.array([0.01, 0.0, -0.0981]), 0.19),
        ("oblique", np.eye(3) / 20.0, np.array([0.6, -0.8, -0.0981]), 0.19),
    ]
    for i in range(3):
        D = random_spd(rng)
        sigma = np.r_[rng.normal(size=2), -abs(rng.normal()) - 0.1]
        out.append((f"coupled-{i}", D, sigma, float(rng.uniform(0.1, 1.0))))
    return out
