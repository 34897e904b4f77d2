"""
Why mix score distance into the affinity kernel
===============================================

The "two-tone" scenes contain one object made of two parts: a distinctive
crown and a trunk whose color is close to the background. A color-only
kernel (``alpha=1``) lets the trunk's scores leak into the background. Some
weight on score distance keeps the trunk attached to its crown.
"""

# %%

from shapeseed.pipeline import alpha_sweep, sweep_table_csv
from shapeseed.synth import synth

scenes = [synth("two-tone-object", 64, 64, s) for s in range(10)]
table = alpha_sweep(scenes, [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
print(sweep_table_csv(table))

# %%
# The same sweep is available from the command line::
#
#     shapeseed sweep-alpha --n-scenes 10 --alphas 0.5,0.8,1.0
