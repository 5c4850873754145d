"""Application-wide constants."""

# Probe and image geometry
PROBE_LENGTH_MM = 37.5
IMAGING_DEPTH_MM = 55.0
IMAGE_WIDTH_PX = 375
IMAGE_HEIGHT_PX = 550
DEPTH_OFFSET_MM = 0.0

# Surface registration
FEATURE_SCALES = (0.5, 1.0, 1.5)
CORRESPONDENCE_CONSISTENCY = 0.25  # fraction of cloud diameter
DESCRIPTOR_BINS = 11  # per angular feature, 33 in total
BASE_RADIUS_FACTOR = 2.0  # x median nearest-neighbour spacing
PERSISTENCE_SIGMA = 1.0
ICP_MAX_ITERATIONS = 200
ICP_MSE_DELTA_TOLERANCE_MM = 1e-4
ICP_REJECTION_FACTOR = 5.0  # x median spacing
TEMPLATE_POINT_COUNT = 1379
CAMERA_POINT_COUNT = 925

# Trajectory planning
NORMAL_NEIGHBOURS = 10
CENTERLINE_INTERVAL_MM = 5.0
SURFACE_NEIGHBOURS = 5

# Confidence-based orientation correction
CONFIDENCE_ALPHA = 2.0
CONFIDENCE_BETA = 90.0
CONFIDENCE_GAMMA = 0.05
CONFIDENCE_DOWNSAMPLE = 4
CONFIDENCE_THRESHOLD = 0.5
SHADOW_MIN_ANGLE_DEG = 2.0
SHADOW_MIN_FRACTION = 0.10
LOOKAHEAD_POINTS = 5

# Motion monitoring
DICE_THRESHOLD = 0.95
PLANE_ITERATIONS = 200
PLANE_INLIER_TOLERANCE_MM = 10.0
PLANE_MIN_INLIER_FRACTION = 0.30

# Compensation
EMC_GATE_MM = 10.0

# Simulator
PHANTOM_LENGTH_MM = 440.0
CONTACT_FORCE_N = 2.0
CONTACT_STIFFNESS_N_PER_M = 250.0
STIFFNESS_RANGE_N_PER_M = (125.0, 500.0)
CONTACT_TOLERANCE_MM = 1.0
CONTACT_SEARCH_MM = 50.0
SPECKLE_SIGMA = 0.1
DEPTH_NOISE_MM = 2.0
MAX_MOTION_TRANSLATION_MM = 140.0
MAX_MOTION_ROTATION_DEG = 80.0
MOTION_RECTANGLE_MM = (110.0, 140.0)

# Validation tolerances
ROTATION_TOLERANCE = 1e-9
UNIT_NORMAL_TOLERANCE = 1e-6

# Stage timing
SLOW_STAGE_THRESHOLD_S = 5.0

# CLI exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATE_ABORT = 2
