"""Published reference values used by the regression and acceptance tests.

``SUBJECT_1_VALUES`` is the first participant's indifference series at the
default delay schedule. ``REFERENCE_K`` holds the 106 Mazur rate estimates of
the full cohort as printed by R (7 significant digits), in row order.
"""

from .core import DEFAULT_DELAYS, IndifferenceSeries

SUBJECT_1_VALUES = (0.4922, 0.9922, 0.9454, 0.8984, 0.8984, 0.3984, 0.1016)

REFERENCE_K = (
    7.052959e-04, 1.952525e-02, 6.279889e-03, 3.106512e+00, 9.443459e-04,
    1.183173e-02, 7.792406e-03, 4.121380e-02, 2.166866e-03, 1.851430e-03,
    1.835216e-02, 6.848412e-02, 1.253200e-02, 5.644911e-05, 3.917017e-03,
    2.750789e-02, 9.416390e-03, 2.706837e-03, 1.158562e-01, 2.339159e-04,
    5.654420e-02, 1.924157e-02, 7.786736e-04, 2.225344e-03, 1.238148e-02,
    1.737184e-03, 1.006645e-02, 6.653795e-02, 4.119001e-04, 4.115331e-04,
    2.122284e-02, 8.613770e-02, 1.438784e+00, 2.457380e-02, 1.087262e-03,
    4.645629e-03, 4.105892e-02, 9.843393e-03, 2.102845e-03, 3.947859e-01,
    4.392440e-03, 1.043863e-02, 5.207565e-03, 2.480166e-03, 2.890474e-01,
    7.969068e-03, 1.041180e-06, 1.111135e-02, 1.334191e-03, 4.690139e-02,
    1.541998e-02, 2.656261e-03, 2.676365e-03, 1.582058e-01, 2.288003e-03,
    1.606234e-02, 1.598051e-02, 5.757535e-02, 1.524680e-02, 5.524457e-01,
    1.029969e-03, 4.620361e-01, 1.040897e-02, 3.163147e-04, 5.727909e-03,
    1.660060e-01, 1.531857e-02, 5.343197e-01, 3.719899e-02, 1.558544e-01,
    1.345135e-03, 3.329768e-04, 4.723152e-05, 3.592244e-02, 8.398586e-01,
    3.267308e+00, 1.283517e-03, 2.957418e-02, 5.499067e-03, 1.423051e-01,
    2.190507e-03, 3.898910e-03, 6.109505e-04, 5.744756e-04, 1.192669e-02,
    3.503430e-04, 5.695165e-02, 1.393875e-02, 1.192544e-01, 1.404184e-04,
    4.431371e-04, 1.813248e-02, 3.385442e-03, 4.639105e-03, 1.151348e-02,
    1.204211e-02, 1.318007e-03, 5.991004e-03, 1.141583e-02, 6.315233e-04,
    1.683690e-02, 4.873263e-04, 4.684651e-03, 1.041180e-06, 1.500254e-03,
    6.310517e-03,
)


def subject_1_series() -> IndifferenceSeries:
    return IndifferenceSeries(DEFAULT_DELAYS, SUBJECT_1_VALUES)
