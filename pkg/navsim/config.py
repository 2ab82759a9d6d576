"""
Global Configuration for Application
"""
import os
import math
import logging

# Get configuration from environment
OUTPUT_DIR = os.getenv("NAVSIM_OUTPUT_DIR", "runs")
WORKERS = int(os.getenv("ANS_WORKERS", "1"))

LOGGING_LEVEL = getattr(logging, os.getenv("NAVSIM_LOG_LEVEL", "INFO").upper(), logging.INFO)

# Grid geometry
RESOLUTION = 0.05  # meters per cell
CELL_AREA = RESOLUTION * RESOLUTION
VISION_RANGE = 64  # V, cells
MAP_SIZE = int(os.getenv("NAVSIM_MAP_SIZE", "960"))  # M, cells
GLOBAL_SIZE = 240  # G, cells

# Agent and sensor
AGENT_RADIUS = 0.1
FOV = math.pi / 2
N_RAYS = 128
MAX_RANGE = 3.2

# Control commands (dx, dy, do) per action
FORWARD_STEP = 0.25
TURN_ANGLE = math.radians(10)

# Noise model fitting
NOISE_K_MIN = 1
NOISE_K_MAX = 20
NOISE_SPLIT = 1.0 / 6.0
NOISE_COVARIANCE_FLOOR = 1e-8
NOISE_EM_TOLERANCE = 1e-6
NOISE_EM_MAX_ITER = 200
NOISE_EM_RESTARTS = 5

# Pose estimator search box
POSE_SEARCH_XY = 0.1
POSE_SEARCH_O = math.radians(5)
POSE_STEP_XY = 0.025
POSE_STEP_O = math.radians(1)
POSE_EXPLORED_WEIGHT = 0.5

# Planner
OBSTACLE_THRESHOLD = 0.5
OBSTACLE_DILATION = 2
SHORT_GOAL_DISTANCE = 0.25
PLANNING_MARGIN = 20  # cells of unexplored space kept around the planning window

# Policies
GOAL_INTERVAL = 25
TURN_THRESHOLD_DEG = 10.0
REWARD_SCALE = 0.02

# Episodes
EXPLORATION_STEPS = 1000
POINTGOAL_STEPS = 500
SUCCESS_RADIUS = 0.2
STOP_RADIUS = 0.15
LARGE_SCENE_M2 = 50.0
COLLISION_TRANSLATION = 0.01  # sensed Forward motion below this counts as a bump
MIN_GEODESIC_M = 1.0
PAIR_ATTEMPTS = 20

# World generation
WORLD_SIZE = 160
WORLD_STYLE = "rooms"
MIN_FREE_FRACTION = 0.05
MIN_EXPLORABLE_M2 = 16.0
MAX_EXPLORABLE_M2 = 36.0
GENERATION_ATTEMPTS = 100
