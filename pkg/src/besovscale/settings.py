"""
Django settings for besovscale.

Values are read from the first configuration files found (see CONFIG PARSER below). Every setting has a fallback, so
the library can be imported without any configuration file present. The library only reads these settings; jobs
pass their own tolerances as arguments.
"""

import os
import configparser

"""CONFIG PARSER """
config = configparser.RawConfigParser()
if 'BESOVSCALE_CONFIG_FILE' in os.environ:
    config.read_file(open(os.environ.get('BESOVSCALE_CONFIG_FILE'), encoding='utf-8'))
else:
    config.read(['/etc/besovscale/besovscale.cfg', os.path.expanduser('~/.besovscale.cfg'), 'besovscale.cfg'],
                encoding='utf-8')

CONFIG_FILE = config

APP_LOG_LEVEL = config.get('logging', 'app_log_level', fallback="WARNING")

""" DJANGO """
INSTALLED_APPS = [
    'dilations',
]

# No models are stored
DATABASES = {}

TIME_ZONE = 'UTC'
USE_TZ = True

"""LOGGING"""
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': APP_LOG_LEVEL,
    },
    'loggers': {
        'dilations': {
            'handlers': ['console'],
            'level': APP_LOG_LEVEL,
            'propagate': False,
        },
        'besovscale': {
            'handlers': ['console'],
            'level': APP_LOG_LEVEL,
            'propagate': False,
        },
    },
}

""" TOLERANCES """
# Eigenvalues closer than this (relative to max(1, |A|)) belong to one cluster
EIGENVALUE_CLUSTER_TOL = config.getfloat('tolerances', 'eigenvalue_cluster', fallback=1e-6)
JORDAN_RECONSTRUCTION_TOL = config.getfloat('tolerances', 'jordan_reconstruction', fallback=1e-8)
# Singular values below KERNEL_RANK_TOL * sigma_max count as zero
KERNEL_RANK_TOL = config.getfloat('tolerances', 'kernel_rank', fallback=1e-8)
VERDICT_TOL = config.getfloat('tolerances', 'verdict', fallback=1e-7)
CONDITION_CAP = config.getfloat('tolerances', 'condition_cap', fallback=1e8)
# Entries of C_A^-1 C_B below this (relative to the row and column they combine) are rounding noise
COUPLING_TOL = config.getfloat('tolerances', 'coupling', fallback=1e-9)

""" PROBES """
PROBE_K_MAX = config.getint('probe', 'k_max', fallback=200)
PROBE_FIT_K_MIN = config.getint('probe', 'fit_k_min', fallback=10)
PROBE_BOUNDED_SLOPE_K = config.getfloat('probe', 'bounded_slope_k', fallback=1e-3)
PROBE_BOUNDED_SLOPE_LOGK = config.getfloat('probe', 'bounded_slope_logk', fallback=0.15)

""" QUASI-NORMS """
CERTIFICATION_SAMPLES = config.getint('quasinorm', 'certification_samples', fallback=2000)
SERIES_CUTOFF = config.getfloat('quasinorm', 'series_cutoff', fallback=1e-12)
COMPARE_SAMPLES = config.getint('quasinorm', 'compare_samples', fallback=400)
RADIUS_DECADES = config.getint('quasinorm', 'radius_decades', fallback=10)

""" COVERINGS """
R_LADDER = [float(r) for r in config.get('coverings', 'r_ladder', fallback="2, 10, 100").split(",")]
COVERING_RANGE = config.getint('coverings', 'range', fallback=100)
COVERING_GROWTH_FACTOR = config.getint('coverings', 'growth_factor', fallback=4)
COVERING_SLACK = config.getint('coverings', 'slack', fallback=2)
SUBORDINATION_K_MAX = config.getint('coverings', 'k_max', fallback=25)

""" SAMPLING """
SEED = config.getint('sampling', 'seed', fallback=0)
