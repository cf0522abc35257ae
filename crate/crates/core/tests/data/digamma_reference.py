"""Regenerate digamma_reference.rs: digamma at 30 points in [1e-3, 1e6].

Each argument is the exact binary value of its f64 literal. Values are computed with mpmath at 60 significant digits and printed with
20 significant digits, well beyond f64 precision.

    python3 digamma_reference.py > digamma_reference.rs
"""
import mpmath

mpmath.mp.dps = 60

ARGS = [
    "0.001", "0.0025", "0.005", "0.01", "0.03", "0.1", "0.25", "0.5",
    "0.75", "1", "1.5", "2", "2.5", "3", "4.2", "5.999", "6", "7.5",
    "9.99", "10", "12.345", "25", "50.5", "100", "333.3", "1000",
    "12345.678", "100000", "543210.5", "1000000",
]

print("// Generated by digamma_reference.py (mpmath, 60 digits). Do not edit.")
print("#[allow(clippy::excessive_precision)]")
print("pub const DIGAMMA_REFERENCE: [(f64, f64); %d] = [" % len(ARGS))
for a in ARGS:
    x = mpmath.mpf(float(a))  # exact binary value of the f64 literal
    print("    (%s, %s)," % (a if "." in a else a + ".0", mpmath.nstr(mpmath.digamma(x), 20, min_fixed=-30, max_fixed=30)))
print("];")
