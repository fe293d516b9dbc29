GRAVITY = 9.81
SIM_DT = 0.002
DECIMATION = 5
CONTROL_DT = SIM_DT * DECIMATION

EPM_MAX_FORCE = 697.0
EPM_SWITCH_LATENCY = 0.005
AIRGAP_REFERENCE_GAP = 1e-3
AIRGAP_RATIO_AT_REFERENCE = 0.07
ALIGNMENT_GAP_TOL = 5e-4
CONTACT_CONFIDENCE_THRESHOLD = 0.5
MAGNET_ACTION_THRESHOLD = 0.5
HARDWARE_DEBOUNCE_TIME = 0.02

GAIT_PERIOD = 1.2
FILTER_ALPHA = 0.35
SWING_HEIGHT = 0.08

EPISODE_LENGTH = 10.0
FROZEN_TIME = 5.0
FALL_MARGIN = 0.5
DETACH_DISTANCE = 0.6

COMMAND_RANGES = (0.5, 0.3, 0.5)
RECOVERY_WINDOWS = (1.2, 2.4, 3.6)
EVAL_PROBS = (1.0, 0.85)

PHASE1_END = 1200
THETA_RAMP = 20000
PROB_RAMP_START = 21200
PROB_RAMP = 13800
PROB_FLOOR = 0.85
SMOOTHNESS_START = 1000
KAPPA_BASE = 0.99975
CURRICULUM_END = PROB_RAMP_START + PROB_RAMP
