from .detector import DetectorConfig, detect_legs, detect_torsos
from .legs import LegClassifier, LegFeatures, classify_leg, leg_features, pair_legs
from .scan import LaserScan, Segment, scans_from_csv, scans_to_csv, segment_scan
from .torso import EllipseFit, TorsoBands, classify_torso, fit_ellipse
from .tracking import (Association, Detection, Track, Tracker, TrackerConfig, associate,
                       kf_predict, kf_update, prune_tracks)
