"""
Default parameters for simulation and estimation.
"""

# Longitudinal model: (beta_0, beta_a, beta_z, beta_t)
BETA = (-2.0, -0.5, 0.5, 0.1)
SIGMA_EPS2 = 1.0
SIGMA_B_DIAG = (1.0, 4.0)  # var(b0), var(b1)

# Study window
STUDY_ORIGIN = 0.0
CENSORING_TIME = 60.0
N_SUBJECTS = 1000
PROB_EXPOSURE = 0.5  # A ~ Bernoulli(0.5), Z ~ N(0, 1)

# Visiting process, one parameter set per mechanism
VISIT_INTERVAL = 6.0                       # regular visits
COVARIATE_GAMMA = (-2.2, 0.5, 0.5)         # (gamma_0, gamma_a, gamma_z)
LATENT_GAMMA = (-3.5, 1.0, 1.0)
LATENT_GAMMA_B = 0.2
LATENT_SIGMA_ETA2 = 1.0
PREVIOUS_GAMMA = (-2.2, 0.0, 0.0)
PREVIOUS_GAMMA_Y = 1.0
THRESHOLD_GRID_STEP = 0.1
THRESHOLD_QUANTILE = 0.8
FRAILTY_GAMMA = (0.0, 0.5, 0.5)            # d Lambda_0(t) = 1

# Frailty link and observation process (Settings B/C)
FRAILTY_VAR = 1.0
THETA = (0.5, 0.5)
ALPHA_IO = (-2.0, 2.0, 1.0)
ALPHA_NON_IO = (0.0, 0.0, 0.0)

# Covariate names used by generated data
EXPOSURE = "A"
CONFOUNDER = "Z"
INTERCEPT = "(Intercept)"
TIME = "time"
COUNT = "prior_count"

# Newton solvers
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
NEWTON_MAX_HALVINGS = 30
NEWTON_STEP_TOL = 1e-6
SEPARATION_NORM = 30.0

# Linear algebra
SINGULAR_CONDITION = 1e12
COLLINEAR_CONDITION = 1e10

# Mixed model optimizer
LME_RESTARTS = 5
LME_XATOL = 1e-8
LME_FATOL = 1e-10
LME_MAX_FEV = 4000

# Bootstrap
N_BOOT = 200
MIN_BOOT = 50
CI_LEVEL = 0.95
