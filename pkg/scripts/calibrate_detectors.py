"""Calibrate the leg classifier and torso bands against the simulator's body model.

Positives: legs / torsos of pedestrians at random ranges, bearings and
headings.  Negatives: short wall segments from the shipped corridor map
(corners, door jambs, wall ends).  Prints feature statistics and detection
/ false-positive rates for the current defaults and a few alternatives.

    python3 scripts/calibrate_detectors.py [--trials 400] [--seed 0]
"""
from __future__ import annotations

import argparse
import math
import pathlib
from dataclasses import replace

import numpy as np

from speedmaps.errors import DegenerateFit
from speedmaps.geometry import Pose2D
from speedmaps.perception.legs import LegClassifier, classify_leg, leg_features
from speedmaps.perception.scan import segment_scan
from speedmaps.perception.torso import TorsoBands, classify_torso, fit_ellipse
from speedmaps.scenario import load_scenario
from speedmaps.simulator import PedestrianAgent, cast_scan

ROOT = pathlib.Path(__file__).resolve().parents[1]
FOV, BEAMS, RANGE, NOISE, GAP = math.radians(270.0), 541, 8.0, 0.005, 0.1


def positive_segments(channel, trials, rng, max_dist=6.0):
    segs = []
    for _ in range(trials):
        d, b, h = rng.uniform(0.5, max_dist), rng.uniform(-1.2, 1.2), rng.uniform(-math.pi, math.pi)
        ped = PedestrianAgent("p", position=(d * math.cos(b), d * math.sin(b)), heading=h)
        scan = cast_scan(None, [ped], Pose2D(), channel, FOV, BEAMS, RANGE, NOISE, rng)
        segs += [s for s in segment_scan(scan, GAP)]
    return segs


def negative_segments(trials, rng, max_width):
    grid = load_scenario(ROOT / "scenarios" / "corridor.scn").grid
    free = grid.inflated(0.3)
    segs = []
    for _ in range(trials):
        while True:
            o = rng.uniform([0, 0], [grid.width * grid.resolution, grid.height * grid.resolution])
            if not free.occupied_at(o):
                break
        scan = cast_scan(grid, [], Pose2D(o[0], o[1], rng.uniform(-math.pi, math.pi)), "ankle",
                         FOV, BEAMS, RANGE, NOISE, rng)
        segs += [s for s in segment_scan(scan, GAP)
                 if np.hypot(*(s.points[-1] - s.points[0])) <= max_width]
    return segs


def leg_report(pos, neg, clf):
    pf = [leg_features(s) for s in pos if len(s) >= 3]
    nf = [leg_features(s) for s in neg if len(s) >= 3]
    tp = np.mean([classify_leg(f, clf)[0] for f in pf])
    fp = np.mean([classify_leg(f, clf)[0] for f in nf]) if nf else 0.0
    return tp, fp, pf


def torso_fits(segs):
    out = []
    for s in segs:
        if len(s) < 6:
            continue
        try:
            out.append(fit_ellipse(s.points))
        except DegenerateFit:
            pass
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    pos = positive_segments("ankle", args.trials, rng)
    neg = negative_segments(args.trials // 2, rng, 0.4)
    clf = LegClassifier()
    tp, fp, pf = leg_report(pos, neg, clf)
    F = np.array([(f.width, f.circularity, f.iav) for f in pf])
    print(f"leg segments: {len(F)} positive, {len(neg)} negative")
    for name, col in zip(("width", "circularity", "iav"), F.T):
        print(f"  {name:12s} median {np.median(col):.4f}  p5 {np.percentile(col, 5):.4f}"
              f"  p95 {np.percentile(col, 95):.4f}")
    print(f"defaults: detection {tp:.3f}  false positives {fp:.3f}")
    for thr in (0.6, 0.8, 0.9, 1.0, 1.2):
        t, f, _ = leg_report(pos, neg, replace(clf, threshold=thr))
        print(f"  threshold {thr:.1f}: detection {t:.3f}  false positives {f:.3f}")

    fits = torso_fits(positive_segments("torso", args.trials, rng))
    bands = TorsoBands()
    ok = np.mean([classify_torso(e, bands) for e in fits])
    A = np.array([(e.semi_major, e.semi_minor) for e in fits])
    print(f"torso fits: {len(fits)}; in default bands {ok:.3f}")
    print(f"  semi-major p5/p50/p95 {np.percentile(A[:, 0], [5, 50, 95]).round(3)}")
    print(f"  semi-minor p5/p50/p95 {np.percentile(A[:, 1], [5, 50, 95]).round(3)}")
    nfits = torso_fits(negative_segments(args.trials // 2, rng, 0.6))
    print(f"wall segments fitted as ellipses: {len(nfits)}; in bands "
          f"{np.mean([classify_torso(e, bands) for e in nfits]) if nfits else 0.0:.3f}")


if __name__ == "__main__":
    main()
