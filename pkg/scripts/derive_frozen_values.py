"""Independent high-precision computation of the reference values frozen into the tests.

Uses only the standard library (``decimal`` at 60 digits, explicit loops), not the
package under test. Run it and paste the printed values into ``tests/frozen.py``:

    python scripts/derive_frozen_values.py
"""
from decimal import Decimal as D, getcontext

getcontext().prec = 60

# Hand-built instance: J = 2 neurons, d = 4, N = 3 examples of P = 3 patches.
W = [["0.3", "-0.2", "0.5", "0.1"], ["-0.4", "0.25", "0.05", "-0.3"]]
X = [
    [["0.2", "0", "0", "0"], ["0", "1", "0", "0"], ["0.1", "-0.3", "0.2", "0.4"]],
    [["-0.2", "0", "0", "0"], ["0", "1", "0", "0"], ["0.5", "0.1", "-0.2", "0.3"]],
    [["0.2", "0", "0", "0"], ["0", "-1", "0", "0"], ["-0.1", "0.2", "0.6", "-0.5"]],
]
Y = [1, -1, 1]
A = [1, 1, -1]

W = [[D(v) for v in row] for row in W]
X = [[[D(v) for v in p] for p in ex] for ex in X]


def score(W, ex):
    total = D(0)
    for w in W:
        for p in ex:
            z = sum(wk * xk for wk, xk in zip(w, p))
            total += z ** 3
    return total


def log1pexp(z):
    return (D(1) + (-z).exp()).ln()


def loss(W):
    return sum(log1pexp(y * score(W, ex)) for ex, y in zip(X, Y)) / len(X)


def sigmoid(z):
    return D(1) / (D(1) + (-z).exp())


def fd_grad(W, h=D("1e-25")):
    # symmetric difference at 60 digits: truncation O(h^2) ~ 1e-50
    out = []
    for j in range(len(W)):
        row = []
        for k in range(len(W[0])):
            up = [r[:] for r in W]
            dn = [r[:] for r in W]
            up[j][k] += h
            dn[j][k] -= h
            row.append((loss(up) - loss(dn)) / (2 * h))
        out.append(row)
    return out


def tensor_power_crossing(x0, eta, A, threshold, y0=None, B=None, limit=100000):
    x, y, t = D(x0), None if y0 is None else D(y0), 0
    while x < threshold and t < limit:
        x = x + D(eta) * D(A) * x * x
        if y is not None:
            y = y + D(eta) * D(B) * y * y
        t += 1
    return t, x, y


def f(v, digits=17):
    return format(float(v), f".{digits}g")


if __name__ == "__main__":
    scores = [score(W, ex) for ex in X]
    print("SCORES =", [f(s) for s in scores])
    print("ELL =", [f(sigmoid(-y * s)) for s, y in zip(scores, Y)])
    print("LOSS =", f(loss(W)))
    print("GRAD =", [[f(v) for v in row] for row in fd_grad(W)])
    # spurious coefficient: (sum over a = y of ell - sum over a != y of ell) / N
    ell = [sigmoid(-y * s) for s, y in zip(scores, Y)]
    coeff = (sum(e for e, y, a in zip(ell, Y, A) if a == y) - sum(e for e, y, a in zip(ell, Y, A) if a != y)) / 3
    print("SPURIOUS_COEFF =", f(coeff))
    # g1 with beta_c = 0.2, beta_s = 1 and canonical basis (v_c = e1, v_s = e2)
    total = sum(D("0.2") ** 3 * w[0] ** 3 + w[1] ** 3 for w in W)
    print("G1 =", f(sigmoid(-total)))

    t, x, _ = tensor_power_crossing("0.01", "1", "0.1", 1)
    print("T0_CROSSING_m0.1_z0.01_v1 =", t, "bound =", 3 / (D("0.1") * D("0.01")) + 8 * 7)
    t, x, y = tensor_power_crossing("0.01", "1", "1", 1, y0="0.01", B="0.01")
    print("COUPLED_x0.01_A1_B0.01: crossing =", t, "y_at_crossing =", f(y))
    print("LOGISTIC_AT_-50 =", f(log1pexp(D(-50)), 20))
