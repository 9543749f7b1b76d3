"""Regenerate the shipped scenario JSON files.

The five layouts cover: straight-road lane keeping (I), overtaking a
static predecessor (II), a single-lane roundabout taken at the third
exit (III), a pedestrian that has just started crossing and leaves the
far lane free (IV), and a pedestrian well into crossing so only slowing
down is safe (V). Geometry constants here are the single source of
truth for the committed JSON files.
"""

import json
import math
from pathlib import Path

HERE = Path(__file__).parent

LANE_WIDTH = 3.75  # slightly wider than the 3.5 m center spacing so the
# penalty field stays below the invalid threshold mid lane-change
PI_2 = math.pi / 2


def straight_lanes(x0=-10.0, x1=130.0):
    return [
        {
            "id": "right",
            "width": LANE_WIDTH,
            "centerline": [[x0, 0.0], [x1, 0.0]],
            "successors": [],
        },
        {
            "id": "left",
            "width": LANE_WIDTH,
            "centerline": [[x0, 3.5], [x1, 3.5]],
            "successors": [],
        },
    ]


def base(name, duration):
    return {
        "name": name,
        "road": {"lanes": straight_lanes(), "route": ["right"]},
        "ego": {"state": {"x": 0.0, "y": 0.0, "theta": 0.0, "v": 5.0}},
        "objects": [],
        "planner": {"iteration_budget": 2000},
        "sim": {"duration": duration},
    }


def scenario_i():
    return base("straight_road", 10.0)


def scenario_ii():
    sc = base("static_overtake", 12.0)
    # Same low-speed/near-obstacle metric refinement as the braking
    # scenario: keeps the tree growable close to the parked car so queries
    # stay solvable instead of cascading into the braking fallback.
    sc["planner"] = {"iteration_budget": 5000, "metric_xy_scale": 2.0, "d_prune": 0.04}
    sc["objects"] = [
        {
            # strong, wide field so plans keep a full lane of berth when
            # passing instead of clipping the corner of the parked car
            "id": "parked_car",
            "type": "vehicle",
            "poses": [[0.0, 30.0, 0.0, 0.0]],
            "field": {"amplitude": 250.0, "sigma_x": 4.0, "sigma_y": 3.0},
        }
    ]
    return sc


def scenario_iii():
    r = 10.0
    ring = []
    # bottom of the ring, counterclockwise through east and north to west
    for deg in range(270, 270 + 271, 5):
        phi = math.radians(deg)
        ring.append([round(r * math.cos(phi), 6), round(r * math.sin(phi), 6)])
    lanes = [
        {
            "id": "approach",
            "width": LANE_WIDTH,
            "centerline": [[-45.0, -10.0], [0.0, -10.0]],
            "successors": ["ring"],
        },
        {
            "id": "ring",
            "width": LANE_WIDTH,
            "centerline": ring,
            "successors": ["exit3"],
        },
        {
            "id": "exit1",
            "width": LANE_WIDTH,
            "centerline": [[10.0, 0.0], [10.0, 20.0]],
            "successors": [],
        },
        {
            "id": "exit2",
            "width": LANE_WIDTH,
            "centerline": [[0.0, 10.0], [-20.0, 10.0]],
            "successors": [],
        },
        {
            "id": "exit3",
            "width": LANE_WIDTH,
            "centerline": [[-10.0, 0.0], [-10.0, -40.0]],
            "successors": [],
        },
    ]
    return {
        "name": "roundabout",
        "road": {"lanes": lanes, "route": ["approach", "ring", "exit3"]},
        "ego": {"state": {"x": -45.0, "y": -10.0, "theta": 0.0, "v": 5.0}},
        "objects": [],
        "planner": {"iteration_budget": 2000},
        "goal": {"lateral_band": 4.0},
        "sim": {"duration": 35.0},
    }


def scenario_iv():
    # Pedestrian has just started crossing from the ego-lane side; the far
    # lane stays clear long enough for a preemptive lane change.
    sc = base("vru_steering", 14.0)
    sc["planner"] = {"iteration_budget": 10000, "metric_xy_scale": 2.0, "d_prune": 0.04}
    sc["goal"] = {"distance": 40.0}
    # Two pedestrians filing in from below: the trailing one closes the
    # below-gap, so the only pass at arrival time is the far lane. The wide
    # longitudinal field makes plans commit to the other lane well before
    # reaching the crossing point.
    ped_field = {"amplitude": 200.0, "sigma_x": 18.0, "sigma_y": 3.0}
    sc["objects"] = [
        {
            "id": "pedestrian_a",
            "type": "pedestrian",
            "poses": [[0.0, 55.0, -2.8, PI_2], [14.0, 55.0, 2.8, PI_2]],
            "field": ped_field,
        },
        {
            "id": "pedestrian_b",
            "type": "pedestrian",
            "poses": [[0.0, 55.0, -5.1, PI_2], [14.0, 55.0, 0.5, PI_2]],
            "field": ped_field,
        },
    ]
    return sc


def scenario_v():
    # A single-file group crossing the whole road: the 2.3 m spacing leaves
    # no gap wide enough to thread through and the group spans both lanes,
    # so neither a shoulder squeeze nor a lane change is available and the
    # planner has to slow down until the tail of the group clears the lane.
    sc = base("vru_braking", 18.0)
    # Low-speed maneuvering (braking to a crawl, then resuming) moves only
    # centimeters per edge; a finer metric scale and prune radius keep such
    # edges insertable instead of witness-discarded.
    sc["planner"] = {"iteration_budget": 5000, "metric_xy_scale": 2.0, "d_prune": 0.04}
    sc["objects"] = [
        {
            "id": f"pedestrian_{chr(ord('a') + i)}",
            "type": "pedestrian",
            "poses": [[0.0, 30.0, y0, PI_2], [18.0, 30.0, y0 + 4.5, PI_2]],
        }
        for i, y0 in enumerate([-2.6, -0.3, 2.0, 4.3])
    ]
    return sc


FILES = {
    "scenario_i_straight_road.json": scenario_i,
    "scenario_ii_static_overtake.json": scenario_ii,
    "scenario_iii_roundabout.json": scenario_iii,
    "scenario_iv_vru_steering.json": scenario_iv,
    "scenario_v_vru_braking.json": scenario_v,
}


def main():
    for fname, make in FILES.items():
        path = HERE / fname
        path.write_text(json.dumps(make(), indent=2) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
