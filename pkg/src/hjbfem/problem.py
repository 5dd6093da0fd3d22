"""Problem definitions: control sets, coefficient callbacks, boundary data,
Cordes certification and the built-in manufactured test problems.

All coefficient callbacks are vectorized: x has shape (n, 2) and alpha is
a scalar or (n,) array; A returns (n, 2, 2), b returns (n, 2), c and f
return (n,).  Exact-solution callbacks take (n, 2) points.
"""

import numpy as np


class ProblemError(Exception):
    pass


class ControlSet:
    """Compact metric control set: a singleton or the angle interval
    [0, 2*pi) parametrizing SO(2)."""

    def __init__(self, kind, value=None):
        if kind not in ("singleton", "angle"):
            raise ProblemError("unknown control set kind %r" % (kind,))
        self.kind = kind
        self.value = 0.0 if value is None else float(value)

    def metric(self, a, b):
        if self.kind == "singleton":
            return np.zeros_like(np.asarray(a, dtype=float)
                                 + np.asarray(b, dtype=float))
        # chordal distance between rotations exp(i a), exp(i b)
        return np.abs(2.0 * np.sin(0.5 * (np.asarray(a) - np.asarray(b))))


class HjbProblem:
    """Data of sup_alpha(A : D^2 u + b . grad u - c u - f) = 0 with
    Dirichlet boundary values r."""

    def __init__(self, control_set, A, b, c, f, r=None, grad_r=None,
                 lam=0.0, eps=0.5, theta=0.5, exact=None, grad_exact=None,
                 hess_exact=None, homogeneous=True, domain="square",
                 name="custom"):
        if lam == 0.0 and (b is not None or c is not None):
            # lambda = 0 is reserved for the homogeneously second-order case
            if b is not None:
                probe = np.asarray(b(np.zeros((1, 2)), 0.0))
                if np.any(probe != 0.0):
                    raise ProblemError("lambda = 0 requires b = 0")
            if c is not None:
                probe = np.asarray(c(np.zeros((1, 2)), 0.0))
                if np.any(probe != 0.0):
                    raise ProblemError("lambda = 0 requires c = 0")
        self.control_set = control_set
        self.A = A
        self.b = b if b is not None else (lambda x, a: np.zeros_like(x))
        self.c = c if c is not None else (
            lambda x, a: np.zeros(len(np.atleast_2d(x))))
        self.f = f
        self.homogeneous = homogeneous
        if homogeneous:
            r = lambda x: np.zeros(len(np.atleast_2d(x)))  # noqa: E731
            grad_r = lambda x: np.zeros_like(np.atleast_2d(x))  # noqa: E731
        self.r = r
        self.grad_r = grad_r
        self.lam = float(lam)
        self.eps = float(eps)
        self.theta = float(theta)
        self.exact = exact
        self.grad_exact = grad_exact
        self.hess_exact = hess_exact
        self.domain = domain
        self.name = name


# -- Cordes condition ---------------------------------------------------------

def cordes_ratio(p, x, alpha):
    """Pointwise Cordes quotient at points x and controls alpha.

    lam > 0: (|A|_F^2 + |b|^2/(2 lam) + (c/lam)^2) / (tr A + c/lam)^2
    lam = 0: |A|_F^2 / (tr A)^2   (requires b = 0, c = 0)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    A = np.asarray(p.A(x, alpha))
    frob2 = (A ** 2).sum(axis=(-2, -1))
    tr = A[..., 0, 0] + A[..., 1, 1]
    if p.lam == 0.0:
        b = np.asarray(p.b(x, alpha))
        c = np.asarray(p.c(x, alpha))
        if np.any(b != 0.0) or np.any(c != 0.0):
            raise ProblemError("lambda = 0 requires b = 0 and c = 0")
        return frob2 / tr ** 2
    b = np.asarray(p.b(x, alpha))
    c = np.asarray(p.c(x, alpha))
    num = frob2 + (b ** 2).sum(-1) / (2.0 * p.lam) + (c / p.lam) ** 2
    return num / (tr + c / p.lam) ** 2


class CordesCertificate:
    def __init__(self, lam, max_ratio, certified_eps, success, worst_x,
                 worst_alpha, nx, nalpha):
        self.lam = lam
        self.max_ratio = max_ratio
        self.certified_eps = certified_eps
        self.success = success
        self.worst_x = worst_x
        self.worst_alpha = worst_alpha
        self.nx = nx
        self.nalpha = nalpha

    def as_dict(self):
        return {"lambda": self.lam, "max_ratio": self.max_ratio,
                "certified_eps": self.certified_eps, "success": self.success,
                "worst_x": list(map(float, self.worst_x)),
                "worst_alpha": float(self.worst_alpha),
                "nx": self.nx, "nalpha": self.nalpha}


def _sample_points(domain, nx):
    s = np.linspace(-1.0, 1.0, nx)
    X, Y = np.meshgrid(s, s, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if domain == "disk":
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= 1.0 + 1e-12]
        # make sure the boundary circle itself is sampled
        th = np.linspace(0.0, 2 * np.pi, 4 * nx, endpoint=False)
        pts = np.vstack([pts, np.column_stack([np.cos(th), np.sin(th)])])
    return pts


def verify_cordes(p, nx=128, nalpha=256):
    """Certify the Cordes condition on a deterministic sample grid.

    Returns a CordesCertificate with the largest admissible epsilon
    consistent with the sampled maximum of the Cordes quotient.
    """
    if nx < 32 or nalpha < 32:
        raise ProblemError("Cordes grids must have at least 32 points")
    pts = _sample_points(p.domain, nx)
    if p.control_set.kind == "singleton":
        alphas = np.array([p.control_set.value])
    else:
        alphas = np.linspace(0.0, 2 * np.pi, nalpha, endpoint=False)
    max_ratio = -np.inf
    worst = (pts[0], alphas[0])
    for a in alphas:
        ratio = cordes_ratio(p, pts, a)
        i = int(np.argmax(ratio))
        if ratio[i] > max_ratio:
            max_ratio = float(ratio[i])
            worst = (pts[i], a)
    d = 2
    if p.lam == 0.0:
        eps = 1.0 / max_ratio - (d - 1)
    else:
        eps = 1.0 / max_ratio - d
    success = eps > 0.0
    # the admissible range is (0, 1]
    eps = min(eps, 1.0)
    return CordesCertificate(p.lam, max_ratio, eps, success, worst[0],
                             worst[1], nx, nalpha)


# -- built-in problems --------------------------------------------------------

def _rot(alpha, n):
    ca = np.broadcast_to(np.cos(alpha), (n,))
    sa = np.broadcast_to(np.sin(alpha), (n,))
    R = np.empty((n, 2, 2))
    R[:, 0, 0] = ca
    R[:, 0, 1] = sa
    R[:, 1, 0] = -sa
    R[:, 1, 1] = ca
    return R


def _conjugate(B, alpha, n):
    """R_alpha B R_alpha^T for (n, 2, 2) matrices B."""
    R = _rot(alpha, n)
    return np.einsum("nij,njk,nlk->nil", R, B, R)


def make_square_hjb(theta=0.5, paper_sign=False):
    """HJB test problem on (-1,1)^2 with nonzero boundary data.

    Control set SO(2); A is a rotated constant anisotropic matrix, the
    exact solution is sin(pi x1) sin(pi x2) + sin(pi (x1+x2)).  With
    paper_sign=False the alpha-dependent forcing enters with the sign
    that makes the stated u the exact solution, i.e.
    f = L u + (1 - cos(2 alpha - pi (x1+x2))).
    """
    B0 = np.array([[2.0, 0.5], [0.5, 1.0]])

    def A(x, alpha):
        x = np.atleast_2d(x)
        n = len(x)
        B = np.broadcast_to(B0, (n, 2, 2))
        return _conjugate(B, alpha, n)

    def c(x, alpha):
        x = np.atleast_2d(x)
        val = 2.0 - 0.5 * (np.cos(2 * alpha) + np.sin(2 * alpha))
        return np.broadcast_to(val, (len(x),)).copy()

    pi = np.pi

    def exact(x):
        x = np.atleast_2d(x)
        return (np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])
                + np.sin(pi * (x[:, 0] + x[:, 1])))

    def grad_exact(x):
        x = np.atleast_2d(x)
        s = pi * (x[:, 0] + x[:, 1])
        g = np.empty_like(x)
        g[:, 0] = pi * np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1]) \
            + pi * np.cos(s)
        g[:, 1] = pi * np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1]) \
            + pi * np.cos(s)
        return g

    def hess_exact(x):
        x = np.atleast_2d(x)
        s = pi * (x[:, 0] + x[:, 1])
        sx, sy = np.sin(pi * x[:, 0]), np.sin(pi * x[:, 1])
        cx, cy = np.cos(pi * x[:, 0]), np.cos(pi * x[:, 1])
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = -pi ** 2 * (sx * sy + np.sin(s))
        H[:, 1, 1] = -pi ** 2 * (sx * sy + np.sin(s))
        H[:, 0, 1] = pi ** 2 * (cx * cy - np.sin(s))
        H[:, 1, 0] = H[:, 0, 1]
        return H

    sign = -1.0 if paper_sign else 1.0

    def f(x, alpha):
        x = np.atleast_2d(x)
        H = hess_exact(x)
        Lu = (A(x, alpha) * H).sum(axis=(-2, -1)) - c(x, alpha) * exact(x)
        bump = 1.0 - np.cos(2 * alpha - pi * (x[:, 0] + x[:, 1]))
        return Lu + sign * bump

    return HjbProblem(ControlSet("angle"), A, None, c, f,
                      r=exact, grad_r=grad_exact, lam=1.0, eps=0.45,
                      theta=theta, exact=exact, grad_exact=grad_exact,
                      hess_exact=hess_exact, homogeneous=False,
                      domain="square", name="square-hjb")


def _disk_polar_parts(x):
    x = np.atleast_2d(x)
    r = np.hypot(x[:, 0], x[:, 1])
    phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
    inside = (r > 0.0) & (r <= 1.0) & (phi > 0.0) & (phi < 1.5 * np.pi)
    return x, r, phi, inside


def _disk_radial(r):
    """R(r) = r^(5/3) (1-r)^(5/2) and its first two derivatives."""
    rm = np.maximum(r, 1e-300)
    om = np.maximum(1.0 - r, 0.0)
    R = rm ** (5 / 3) * om ** (5 / 2)
    R1 = (5 / 3) * rm ** (2 / 3) * om ** (5 / 2) \
        - (5 / 2) * rm ** (5 / 3) * om ** (3 / 2)
    R2 = (10 / 9) * rm ** (-1 / 3) * om ** (5 / 2) \
        - 2 * (5 / 3) * (5 / 2) * rm ** (2 / 3) * om ** (3 / 2) \
        + (15 / 4) * rm ** (5 / 3) * om ** (1 / 2)
    return R, R1, R2


def _disk_angular(phi):
    """S(phi) = sin(2 phi / 3)^(5/2) and its first two derivatives."""
    s = np.maximum(np.sin(2 * phi / 3), 0.0)
    c = np.cos(2 * phi / 3)
    S = s ** (5 / 2)
    S1 = (5 / 3) * s ** (3 / 2) * c
    S2 = (10 / 9) * (1.5 * np.sqrt(s) * c ** 2 - s ** (5 / 2))
    return S, S1, S2


def make_disk_hjb(theta=0.5, paper_sign=False):
    """HJB test problem on the unit disk with a singular exact solution.

    Homogeneously second-order (b = 0, c = 0, lambda = 0) with a near
    degenerate rotated diffusion; the exact solution
    r^(5/3) (1-r)^(5/2) sin(2 phi/3)^(5/2) on the sector 0 < phi < 3 pi/2
    (zero elsewhere) lies in H^s only for s < 8/3.
    """

    def A(x, alpha):
        x = np.atleast_2d(x)
        n = len(x)
        r2 = x[:, 0] ** 2 + x[:, 1] ** 2
        B = np.zeros((n, 2, 2))
        B[:, 0, 0] = 1.0 + r2
        B[:, 1, 1] = 1.01 - r2
        B[:, 0, 1] = 0.005
        B[:, 1, 0] = 0.005
        return _conjugate(B, alpha, n)

    def exact(x):
        x, r, phi, inside = _disk_polar_parts(x)
        R, _, _ = _disk_radial(r)
        S, _, _ = _disk_angular(phi)
        return np.where(inside, R * S, 0.0)

    def grad_exact(x):
        x, r, phi, inside = _disk_polar_parts(x)
        R, R1, _ = _disk_radial(r)
        S, S1, _ = _disk_angular(phi)
        rr = np.maximum(r, 1e-300)
        cp, sp = x[:, 0] / rr, x[:, 1] / rr
        ur = R1 * S
        up = R * S1 / rr
        g = np.empty_like(x)
        g[:, 0] = np.where(inside, ur * cp - up * sp, 0.0)
        g[:, 1] = np.where(inside, ur * sp + up * cp, 0.0)
        return g

    def hess_exact(x):
        x, r, phi, inside = _disk_polar_parts(x)
        R, R1, R2 = _disk_radial(r)
        S, S1, S2 = _disk_angular(phi)
        rr = np.maximum(r, 1e-300)
        cp, sp = x[:, 0] / rr, x[:, 1] / rr
        urr = R2 * S
        urp = R1 * S1
        upp = R * S2
        ur = R1 * S
        up = R * S1
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = (urr * cp ** 2 - 2 * urp * cp * sp / rr
                      + upp * sp ** 2 / rr ** 2 + ur * sp ** 2 / rr
                      + 2 * up * cp * sp / rr ** 2)
        H[:, 1, 1] = (urr * sp ** 2 + 2 * urp * cp * sp / rr
                      + upp * cp ** 2 / rr ** 2 + ur * cp ** 2 / rr
                      - 2 * up * cp * sp / rr ** 2)
        H[:, 0, 1] = (urr * cp * sp + urp * (cp ** 2 - sp ** 2) / rr
                      - upp * cp * sp / rr ** 2 - ur * cp * sp / rr
                      - up * (cp ** 2 - sp ** 2) / rr ** 2)
        H[:, 1, 0] = H[:, 0, 1]
        zero = np.zeros_like(H)
        return np.where(inside[:, None, None], H, zero)

    sign = -1.0 if paper_sign else 1.0
    pi = np.pi

    def f(x, alpha):
        x = np.atleast_2d(x)
        H = hess_exact(x)
        Lu = (A(x, alpha) * H).sum(axis=(-2, -1))
        bump = 1.0 - np.cos(2 * alpha - pi * (x[:, 0] + x[:, 1]))
        return Lu + sign * bump

    return HjbProblem(ControlSet("angle"), A, None, None, f,
                      lam=0.0, eps=0.008, theta=theta, exact=exact,
                      grad_exact=grad_exact, hess_exact=hess_exact,
                      homogeneous=True, domain="disk", name="disk-hjb")


def make_linear_nondiv(A, b, c, f, r=None, grad_r=None, lam=1.0, theta=0.5,
                       exact=None, grad_exact=None, hess_exact=None,
                       domain="square", name="linear"):
    """Linear nondivergence-form problem as a singleton-control HJB.

    Coefficient callbacks take (x, alpha) like HJB callbacks; the alpha
    argument is ignored by construction.
    """
    homogeneous = r is None
    return HjbProblem(ControlSet("singleton"), A, b, c, f, r=r,
                      grad_r=grad_r, lam=lam, theta=theta, exact=exact,
                      grad_exact=grad_exact, hess_exact=hess_exact,
                      homogeneous=homogeneous, domain=domain, name=name)


def make_poisson():
    """Laplace special case on (-1,1)^2: A = I, u = sin(pi x1) sin(pi x2)."""
    pi = np.pi

    def A(x, alpha):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()

    def exact(x):
        x = np.atleast_2d(x)
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def grad_exact(x):
        x = np.atleast_2d(x)
        g = np.empty_like(x)
        g[:, 0] = pi * np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1])
        g[:, 1] = pi * np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1])
        return g

    def hess_exact(x):
        x = np.atleast_2d(x)
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = -pi ** 2 * exact(x)
        H[:, 1, 1] = -pi ** 2 * exact(x)
        H[:, 0, 1] = pi ** 2 * np.cos(pi * x[:, 0]) * np.cos(pi * x[:, 1])
        H[:, 1, 0] = H[:, 0, 1]
        return H

    def f(x, alpha):
        x = np.atleast_2d(x)
        return -2 * pi ** 2 * exact(x)

    return make_linear_nondiv(A, None, None, f, lam=0.0, exact=exact,
                              grad_exact=grad_exact, hess_exact=hess_exact,
                              domain="square", name="poisson")


def get_problem(name, theta=0.5, paper_sign=False):
    if name == "square-hjb":
        return make_square_hjb(theta=theta, paper_sign=paper_sign)
    if name == "disk-hjb":
        return make_disk_hjb(theta=theta, paper_sign=paper_sign)
    if name == "poisson":
        p = make_poisson()
        p.theta = theta
        return p
    raise ProblemError("unknown problem %r" % (name,))
