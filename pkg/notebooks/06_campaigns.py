# %% [markdown]
# # Monte Carlo campaigns
#
# The same functions behind the command line, at a size that runs in
# seconds. Use `qpq-sim table1 --runs 100` and friends for the real thing.

# %%
from qpq_sim.experiments import ExperimentConfig, format_rows, run_table1, run_table2
from qpq_sim.verify import run_verify

# %%
cfg = ExperimentConfig.defaults("table1", N=[900], runs=10)
print(format_rows(run_table1(cfg), "csv"))

# %%
cfg = ExperimentConfig.defaults("table2", N=[2000], l=[8, 16], runs=10)
print(format_rows(run_table2(cfg), "csv"))

# %%
for row in run_verify(only=["jprotocol", "p_discard"]):
    print(("ok  " if row["passed"] else "FAIL"), row["check"], row["observed"])
