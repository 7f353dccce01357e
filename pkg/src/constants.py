import math

# earth gravitational parameter, km^3/s^2
MU_EARTH = 398600.4418
# earth equatorial radius (WGS84), km
EARTH_RADIUS = 6378.137
# WGS84 flattening
WGS84_FLATTENING = 1.0 / 298.257223563
# zonal harmonics of the earth gravity field
J2 = 1.08263e-3
J3 = -2.532e-6
J4 = -1.62e-6
# earth rotation rate, rad/s
EARTH_ROTATION_RATE = 7.292115e-5
# any radius below this is inside the earth, km
SUBTERRANEAN_RADIUS = 6378.0
# third bodies, km^3/s^2
MU_SUN = 1.32712440018e11
MU_MOON = 4902.800066
# astronomical unit, km
ASTRONOMICAL_UNIT = 149597870.7
# solar radiation pressure at 1 AU, N/m^2
SOLAR_PRESSURE = 4.56e-6

# one arcsecond in radians
ARCSEC = math.pi / 648000.0
SECONDS_PER_DAY = 86400.0
SECONDS_PER_HOUR = 3600.0
# seconds in a julian century
SECONDS_PER_CENTURY = 86400.0 * 36525.0
# reference epoch of the time scale, every epoch is counted in seconds from it
J2000_ISO = "2000-01-01T12:00:00"

# truncation order of the taylor algebra
DEFAULT_ORDER = 2
# highest truncation order supported by the algebra
MAX_ORDER = 4
# coefficients below this (relative to 1 + |constant part|) are dropped after each operation
COEFF_CLEANUP_TOL = 1e-14

# nonlinearity index threshold that triggers a split
DEFAULT_NLI_THRESHOLD = 1e-2
# domains at this split depth are flagged instead of split again
DEFAULT_MAX_DEPTH = 12
# half-width of lifted quantities, in standard deviations
DEFAULT_Z_SCORE = 3.0
# absolute slack when intersecting projected bounds with a measurement box, rad
OVERLAP_SLACK = 1e-12
# eigenvalues below this fraction of the trace are clamped to zero
EIGEN_CLAMP = 1e-14
# tolerance on negative eigenvalues of a covariance, as a fraction of the trace
PSD_TOLERANCE = 1e-10

# kepler equation newton solver
KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50
# transfer angles closer than this to 0 or pi are rejected by the lambert solver, rad
LAMBERT_COLLINEAR_TOL = 1e-6
LAMBERT_MAX_ITER = 200

# relative tolerances of the numerical propagator over reals and over polynomials
HF_TOL_REAL = 1e-10
HF_TOL_POLY = 1e-9
# smallest step the integrator may take, s
MIN_STEP = 1e-3
# first trial step of the integrator, s
INITIAL_STEP = 60.0

# angles-only initial orbit determination
IOD_RESIDUAL_TOL = 1e-9
IOD_SHOOTING_TOL = 1e-6
IOD_MAX_ITER = 25
MIN_PERIGEE_ALTITUDE = 200.0

# batch estimators
LM_LAMBDA0 = 1e-3
LM_FACTOR = 10.0
LM_LAMBDA_MAX = 1e10
EPS_RES = 1e-8
EPS_OPT = 1e-8
EPS_STEP = 1e-10
ESTIMATOR_MAX_ITER = 25
CONDITION_LIMIT = 1e12
# lsar weights are 1 / (LSAR_WEIGHT_FACTOR * sigma)
LSAR_WEIGHT_FACTOR = 1.24
# pivoting tolerance of the simplex solver
SIMPLEX_TOL = 1e-9

# default noise of the synthetic campaign, arcsec
DEFAULT_SIGMA_RA_ARCSEC = 1.285
DEFAULT_SIGMA_DEC_ARCSEC = 1.280
# default stochastic acceleration standard deviation per axis, km/s^2
DEFAULT_ACCEL_SIGMA = 1e-11
# observations further apart than this start a new pass, h
DEFAULT_PASS_GAP_HOURS = 12.0
# fixed formatting of floats in every text artifact
FLOAT_FORMAT = ".17g"

__all__ = [
    "MU_EARTH",
    "EARTH_RADIUS",
    "WGS84_FLATTENING",
    "J2",
    "J3",
    "J4",
    "EARTH_ROTATION_RATE",
    "SUBTERRANEAN_RADIUS",
    "MU_SUN",
    "MU_MOON",
    "ASTRONOMICAL_UNIT",
    "SOLAR_PRESSURE",
    "ARCSEC",
    "SECONDS_PER_DAY",
    "SECONDS_PER_HOUR",
    "SECONDS_PER_CENTURY",
    "J2000_ISO",
    "DEFAULT_ORDER",
    "MAX_ORDER",
    "COEFF_CLEANUP_TOL",
    "DEFAULT_NLI_THRESHOLD",
    "DEFAULT_MAX_DEPTH",
    "DEFAULT_Z_SCORE",
    "OVERLAP_SLACK",
    "EIGEN_CLAMP",
    "PSD_TOLERANCE",
    "KEPLER_TOL",
    "KEPLER_MAX_ITER",
    "LAMBERT_COLLINEAR_TOL",
    "LAMBERT_MAX_ITER",
    "HF_TOL_REAL",
    "HF_TOL_POLY",
    "MIN_STEP",
    "INITIAL_STEP",
    "IOD_RESIDUAL_TOL",
    "IOD_SHOOTING_TOL",
    "IOD_MAX_ITER",
    "MIN_PERIGEE_ALTITUDE",
    "LM_LAMBDA0",
    "LM_FACTOR",
    "LM_LAMBDA_MAX",
    "EPS_RES",
    "EPS_OPT",
    "EPS_STEP",
    "ESTIMATOR_MAX_ITER",
    "CONDITION_LIMIT",
    "LSAR_WEIGHT_FACTOR",
    "SIMPLEX_TOL",
    "DEFAULT_SIGMA_RA_ARCSEC",
    "DEFAULT_SIGMA_DEC_ARCSEC",
    "DEFAULT_ACCEL_SIGMA",
    "DEFAULT_PASS_GAP_HOURS",
    "FLOAT_FORMAT",
]
