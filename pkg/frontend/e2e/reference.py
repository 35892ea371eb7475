"""Compute the expected trajectory for the UI end-to-end test.

Builds the session exactly the way the serve command does, runs it against
the dataset's own concept labels, and dumps the oracle's answer per row, the
row sequence chosen, and the per-round records. The browser client must
reproduce all three over HTTP.
"""

import argparse
import json
from pathlib import Path

from seals.config import load_config
from seals.engine import ActiveRun, ExperimentConfig, OracleLabeler
from seals.runner import build_index, open_dataset, plan_concepts


class RecordingOracle:
    def __init__(self, dataset, concept):
        self.inner = OracleLabeler(dataset, concept)
        self.rows = []

    def label(self, row):
        self.rows.append(int(row))
        return self.inner.label(row)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    plan = load_config(args.config)
    dataset, eval_dataset = open_dataset(plan, None)
    concept = plan_concepts(plan, dataset)[0]
    spec = plan.runs[0]
    index = build_index(plan, dataset)
    config = ExperimentConfig(
        concept=concept,
        strategy=spec.strategy_instance(plan.child_seed(spec.name, concept, 0)),
        mode=spec.mode_instance(),
        batch_size=plan.batch_size,
        budget=plan.budget,
        seed=plan.seed_spec(spec.name, concept, 0),
        train=plan.train,
    )
    oracle = RecordingOracle(dataset, concept)
    run = ActiveRun(config, dataset, index=index, eval_dataset=eval_dataset)
    records = run.run(oracle)

    labels = dataset.oracle_labels(concept)
    out = {
        "cell": spec.name,
        "labels": {str(row): int(labels[row]) for row in range(dataset.n)},
        "sequence": oracle.rows,
        "records": [
            r.to_row(concept, 0, timings=plan.record_timings) for r in records
        ],
    }
    Path(args.out).write_text(json.dumps(out), encoding="utf-8")


if __name__ == "__main__":
    main()
