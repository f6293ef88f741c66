"""Rebuild the stored test network and its golden region count.

The count is accepted only if a dense grid finds no activation pattern
missing from the decomposition and every region's interior point reproduces
its own pattern.  Run from the repository root: python3 tests/data/regenerate.py
"""
import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

from helpers import acceptance_net  # noqa: E402
from relu_pwa import Polyhedron, enumerate_regions  # noqa: E402

net = acceptance_net("2-10-10-2")
net.save(HERE / "net_2_10_10_2.json")
pwa = enumerate_regions(net, Polyhedron.from_box([-1, -1], [1, 1]))
found = {r.pattern.tobytes() for r in pwa.regions}

g = np.linspace(-1, 1, 1001)
X = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
sampled = {p.tobytes() for p in np.unique(net.activation_pattern(X), axis=0)}
missing = sampled - found
assert not missing, f"{len(missing)} sampled patterns missing from the decomposition"
for r in pwa.regions:
    assert net.activation_pattern(r.center).tobytes() == r.pattern.tobytes()

golden = {"net_2_10_10_2": {"domain_box": "-1,1;-1,1", "regions": len(pwa), "grid_patterns": len(sampled)}}
(HERE / "golden.json").write_text(json.dumps(golden, indent=2) + "\n")
print(golden)
