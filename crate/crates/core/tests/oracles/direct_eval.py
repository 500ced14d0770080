"""Extended-precision reference values frozen into the Rust test-suite.

Run with `python3 direct_eval.py`; every printed number is copied verbatim
into the test that cites it. Nothing here imports the Rust code.
"""
from mpmath import mp, mpf, exp, log, expm1, log1p, quad, findroot, sqrt, erfc

mp.dps = 40


def frank_cdf(xi, u, v):
    return -1 / xi * log(1 + (exp(-xi * u) - 1) * (exp(-xi * v) - 1) / (exp(-xi) - 1))


def frank_h1(xi, u, v):
    a = exp(-xi * u)
    return a * (exp(-xi * v) - 1) / ((exp(-xi) - 1) + (a - 1) * (exp(-xi * v) - 1))


def frank_h2(xi, u, v):
    return frank_h1(xi, v, u)


def frank_tau(xi):
    d1 = quad(lambda t: t / (exp(t) - 1) if t != 0 else mpf(1), [0, xi]) / xi
    return 1 - 4 / xi * (1 - d1)


def ph_cdf(lam, lp):
    return 1 - exp(-lam * exp(lp))


def weibull_cdf(c, loc, nu):
    return 1 - exp(-exp((log(c) - loc) / nu))


def weibull_logpdf(c, loc, nu):
    w = (log(c) - loc) / nu
    return w - exp(w) - log(nu) - log(c)


# lowdep complier parameters
alpha, beta = mpf("-0.6"), [mpf(1), mpf("0.9")]
eta, nu = [mpf("1.5"), mpf("-0.8"), mpf("-2"), mpf("0.9")], mpf("1.2")


def lp(z, x):
    return z * alpha + beta[0] * x[0] + beta[1] * x[1]


def loc(z, x):
    return eta[0] + eta[1] * z + eta[2] * x[0] + eta[3] * x[1]


print("frank xi=5 C(0.3,0.7) =", mp.nstr(frank_cdf(mpf(5), mpf("0.3"), mpf("0.7")), 20))

t = mpf(2)
print("ph_cdf lowdep z=1 x=(1,0.5) t=2 =",
      mp.nstr(ph_cdf(mpf("0.5") * t ** mpf("0.75"), lp(1, [1, mpf("0.5")])), 20))

xi25 = findroot(lambda x: frank_tau(x) - mpf("0.25"), mpf(2.4))
print("frank xi(tau=0.25) =", mp.nstr(xi25, 20))


def psi(xi, lam, y, z, x):
    l = lp(z, x)
    ft = ph_cdf(lam, l)
    fc = weibull_cdf(y, loc(z, x), nu)
    s = 1 - ft - fc + frank_cdf(xi, ft, fc)
    return l - lam * exp(l) - log(s) + log(1 - frank_h1(xi, ft, fc))


print("psi frank tau=.25 y=1 z=1 x=(1,.5) lam=.5 =",
      mp.nstr(psi(xi25, mpf("0.5"), mpf(1), 1, [1, mpf("0.5")]), 20))

# loglik contributions against the step hazard times (0.5,1.0,1.5), jumps (0.1,0.2,0.15)
def contrib(xi, y, d1, d2, z, x, cum, jump):
    l = lp(z, x)
    ft = ph_cdf(cum, l)
    fc = weibull_cdf(y, loc(z, x), nu)
    if d1:
        return log(jump) + l - cum * exp(l) + log(1 - frank_h1(xi, ft, fc))
    if d2:
        return weibull_logpdf(y, loc(z, x), nu) + log(1 - frank_h2(xi, ft, fc))
    return log(1 - ft - fc + frank_cdf(xi, ft, fc))


obs = [
    (mpf(1), 1, 0, 1, [1, mpf("0.5")], mpf("0.3"), mpf("0.2")),
    (mpf("1.2"), 0, 1, 0, [0, mpf("0.3")], mpf("0.3"), None),
    (mpf(2), 0, 0, 1, [1, mpf("0.9")], mpf("0.45"), None),
]
for o in obs:
    print("contrib", o[:4], "=", mp.nstr(contrib(xi25, *o), 20))


def bvn_upper(h, k, r):
    h, k, r = mpf(h), mpf(k), mpf(r)
    phi = lambda x: exp(-x * x / 2) / sqrt(2 * mp.pi)
    ncdf = lambda x: erfc(-x / sqrt(2)) / 2
    return quad(lambda x: phi(x) * ncdf((r * x - k) / sqrt(1 - r * r)), [h, mp.inf])


for args in [("0.5", "-0.3", "0.4"), ("-1.2", "0.7", "-0.8"), ("1.5", "2.0", "0.97"), ("-0.4", "0.3", "-0.96")]:
    print("bvn_upper", args, "=", mp.nstr(bvn_upper(*args), 20))
