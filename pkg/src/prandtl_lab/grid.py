"""Discretization of the periodic strip T x [0, y_max].

x is periodic with period 2*pi and differentiated spectrally; y is a
truncated half-line with second-order finite differences (one-sided at
both ends) on a uniform or tanh-stretched node set.  Quadrature is the
exact mean in x times the trapezoid rule in y, so weighted norms inherit
the second-order accuracy of the y operators.
"""

import numpy as np

from .errors import ConfigurationError, OverflowNormError

TWO_PI = 2.0 * np.pi


def fd_weights(x0, x, m):
    """Finite-difference weights at x0 for derivatives 0..m on nodes x.

    Fornberg's recursion; returns an (m+1, len(x)) array whose row k
    gives the weights of the k-th derivative.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if m >= n:
        raise ConfigurationError(f"need at least {m + 1} nodes for derivative order {m}")
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


class Grid2D:
    """Structured grid on T x [0, y_max] with weight <y> = 1 + y."""

    def __init__(self, nx, ny, y_max, y_nodes, stretch=0.0):
        self.nx = int(nx)
        self.ny = int(ny)
        self.x_period = TWO_PI
        self.y_max = float(y_max)
        self.y_nodes = np.asarray(y_nodes, dtype=float)
        self.stretch = float(stretch)
        self.x_nodes = TWO_PI * np.arange(self.nx) / self.nx
        self.dx = TWO_PI / self.nx
        # trapezoid weights in y (metric Jacobian of any stretching is
        # absorbed by using the physical node spacings directly)
        dy = np.diff(self.y_nodes)
        wy = np.zeros(self.ny)
        wy[:-1] += 0.5 * dy
        wy[1:] += 0.5 * dy
        self._trapz_wy = wy
        self.dy_min = float(dy.min())
        self._ddy_mats = {}

    def weight_fn(self, y):
        return 1.0 + y

    @property
    def weight(self):
        """<y> = 1 + y on the nodes."""
        return 1.0 + self.y_nodes

    def integrate(self, values):
        """Integral over T x [0, y_max]: exact mean in x, trapezoid in y."""
        return self.dx * float(np.sum(values @ self._trapz_wy))

    def integrate_y(self, values_1d):
        """Trapezoid integral of a 1D profile over [0, y_max]."""
        return float(values_1d @ self._trapz_wy)

    def ddy_matrix(self, order):
        """Dense ny x ny differentiation matrix for d^order/dy^order."""
        key = int(order)
        if key not in self._ddy_mats:
            if order not in (1, 2):
                raise ConfigurationError("ddy supports order 1 or 2")
            y = self.y_nodes
            n = self.ny
            D = np.zeros((n, n))
            # one extra node in the one-sided stencils keeps the
            # boundary rows second-order for both derivative orders
            width = 3 if order == 1 else 4
            for i in range(n):
                if i == 0:
                    cols = np.arange(width)
                elif i == n - 1:
                    cols = np.arange(n - width, n)
                else:
                    cols = np.arange(i - 1, i + 2)
                D[i, cols] = fd_weights(y[i], y[cols], order)[order]
            self._ddy_mats[key] = D
        return self._ddy_mats[key]

    def wall_weights(self, order, npts):
        """One-sided weights for d^order/dy^order at y = 0 using npts nodes."""
        return fd_weights(0.0, self.y_nodes[:npts], order)[order]

    def __eq__(self, other):
        return (isinstance(other, Grid2D) and self.nx == other.nx
                and self.ny == other.ny and np.array_equal(self.y_nodes, other.y_nodes))

    def __repr__(self):
        kind = "uniform" if self.stretch == 0 else f"tanh(stretch={self.stretch:g})"
        return f"Grid2D(nx={self.nx}, ny={self.ny}, y_max={self.y_max:g}, {kind})"


class ScalarField:
    """Real field on a Grid2D; values indexed [ix, iy], immutable."""

    def __init__(self, grid, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (grid.nx, grid.ny):
            raise ConfigurationError(
                f"field shape {values.shape} does not match grid ({grid.nx}, {grid.ny})")
        if not np.all(np.isfinite(values)):
            raise OverflowNormError("field contains non-finite values")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_profile(cls, grid, profile_1d):
        """x-independent field from a 1D wall-normal profile."""
        vals = np.broadcast_to(np.asarray(profile_1d, float), (grid.nx, grid.ny))
        return cls(grid, np.array(vals))

    @classmethod
    def from_function(cls, grid, fn):
        """Field sampled from fn(x, y) on the tensor grid."""
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        return cls(grid, np.broadcast_to(fn(X, Y), (grid.nx, grid.ny)).copy())

    def __repr__(self):
        return f"ScalarField({self.grid!r}, range [{self.values.min():g}, {self.values.max():g}])"


class WeightParams:
    """Decay exponents (gamma, sigma) of the weighted norms."""

    def __init__(self, gamma, sigma):
        if not (gamma > 1.5 and gamma + 0.5 < sigma <= 2.0 * gamma - 1.0):
            raise ConfigurationError(
                f"weights (gamma={gamma}, sigma={sigma}) outside the admissible "
                "region gamma > 3/2, gamma + 1/2 < sigma <= 2*gamma - 1")
        self.gamma = float(gamma)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"WeightParams(gamma={self.gamma:g}, sigma={self.sigma:g})"


def make_grid(nx, ny, y_max, stretch=0.0):
    """Grid with uniform (stretch = 0) or tanh-clustered y nodes.

    stretch > 0 concentrates nodes near the wall y = 0; larger values
    cluster harder.
    """
    if nx < 4 or ny < 16 or y_max < 10:
        raise ConfigurationError(
            f"grid sizes out of range: need nx >= 4, ny >= 16, y_max >= 10 "
            f"(got nx={nx}, ny={ny}, y_max={y_max})")
    if stretch < 0:
        raise ConfigurationError("stretch must be >= 0")
    t = np.linspace(0.0, 1.0, ny)
    if stretch == 0:
        y = y_max * t
    else:
        y = y_max * (1.0 + np.tanh(stretch * (t - 1.0)) / np.tanh(stretch))
    y[0] = 0.0
    y[-1] = y_max
    return Grid2D(nx, ny, y_max, y, stretch)


def ddx(f, order=1):
    """Spectral tangential derivative of the given order (exact on
    band-limited data)."""
    if order < 1:
        raise ConfigurationError("ddx order must be >= 1")
    grid = f.grid
    k = np.fft.rfftfreq(grid.nx, d=1.0 / grid.nx)
    fac = (1j * k) ** order
    if order % 2 == 1 and grid.nx % 2 == 0:
        fac[-1] = 0.0  # Nyquist mode has no well-defined odd derivative
    out = np.fft.irfft(np.fft.rfft(f.values, axis=0) * fac[:, None], n=grid.nx, axis=0)
    return ScalarField(grid, out)


def ddy(f, order=1):
    """Finite-difference wall-normal derivative, second order including
    the one-sided boundary rows."""
    D = f.grid.ddy_matrix(order)
    return ScalarField(f.grid, f.values @ D.T)


def dmixed(f, ax, ay):
    """Mixed derivative d^ax/dx^ax d^ay/dy^ay (ddy applied ay times)."""
    out = f
    if ax > 0:
        out = ddx(out, ax)
    for _ in range(ay):
        out = ddy(out, 1)
    return out


def weighted_norm(f, s, lam, mode="single_L2"):
    """Weighted L2 or weighted H^s norm.

    single_L2:     || f <y>^lam ||_{L2}
    full_Hs_gamma: ( sum_{|a| <= s} || <y>^(lam + a2) d^a f ||^2 )^(1/2),
    the weight exponent growing with the wall-normal derivative count.
    """
    grid = f.grid
    if mode == "single_L2":
        val = grid.integrate(f.values ** 2 * grid.weight[None, :] ** (2.0 * lam))
        out = np.sqrt(val)
    elif mode == "full_Hs_gamma":
        if s > 6:
            raise ConfigurationError("weighted_norm supports s <= 6")
        total = 0.0
        for ax in range(s + 1):
            for ay in range(s + 1 - ax):
                g = dmixed(f, ax, ay)
                total += grid.integrate(
                    g.values ** 2 * grid.weight[None, :] ** (2.0 * (lam + ay)))
        out = np.sqrt(total)
    else:
        raise ConfigurationError(f"unknown norm mode {mode!r}")
    if not np.isfinite(out):
        raise OverflowNormError("weighted norm is not finite")
    return float(out)
