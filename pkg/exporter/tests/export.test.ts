import { describe, expect, it } from "vitest";

import { SammeModel } from "../src/adaboost";
import { exportModel, exportToPortable } from "../src/export";
import {
  PortableInternalNode,
  PortableLeafNode,
  ensembleScores,
  isLeaf,
  predict,
  validatePortable,
} from "../src/portable";
import { mulberry32, uniformMatrix } from "../src/rng";
import { SourceFile, sourcePredict, trainSource } from "../src/sources";
import { verifyParity } from "../src/verify";

function syntheticTable(n = 240, seed = 3) {
  const rng = mulberry32(seed);
  const X = uniformMatrix(rng, n, 3);
  const y = X.map((row) => (row[0] + 0.5 * row[1] > 0.8 ? 1 : 0));
  return { X, y, names: ["f0", "f1", "f2"] };
}

describe("decision tree export", () => {
  it("turns a depth-1 stump into a 3-node portable tree", () => {
    // cleanly separable on one feature; depth 1 suffices
    const X = [[0.1], [0.2], [0.3], [0.4], [0.7], [0.8], [0.9], [0.95]];
    const y = [0, 0, 0, 0, 1, 1, 1, 1];
    const source = trainSource(X, y, ["f0"], { kind: "dt", maxDepth: 1 });
    const { portable, record } = exportModel(source);
    expect(portable.model_kind).toBe("decision_tree");
    expect(portable.trees).toHaveLength(1);
    expect(portable.trees[0].nodes).toHaveLength(3);
    expect(record.max_depth).toBe(1);
    expect(portable.child_convention).toBe("gt_left");
  });

  it("swaps children so that x > threshold goes left", () => {
    const X = [[0.1], [0.2], [0.3], [0.4], [0.7], [0.8], [0.9], [0.95]];
    const y = [0, 0, 0, 0, 1, 1, 1, 1];
    const source = trainSource(X, y, ["f0"], { kind: "dt", maxDepth: 1 });
    const portable = exportToPortable(source);
    const tree = portable.trees[0];
    const root = tree.nodes.find((n) => n.id === tree.root) as PortableInternalNode;
    const leftLeaf = tree.nodes.find((n) => n.id === root.left) as PortableLeafNode;
    // above the threshold means class 1 here
    expect(leftLeaf.distribution[1]).toBeGreaterThan(leftLeaf.distribution[0]);
    expect(predict(portable, [root.threshold + 0.05])).toBe(1);
    expect(predict(portable, [root.threshold - 0.05])).toBe(0);
  });

  it("pads truncated leaf distributions to n_classes and keeps them normalized", () => {
    const { X, y, names } = syntheticTable();
    const portable = exportToPortable(trainSource(X, y, names, { kind: "dt", maxDepth: 4 }));
    for (const node of portable.trees[0].nodes) {
      if (isLeaf(node)) {
        expect(node.distribution).toHaveLength(2);
        const sum = node.distribution.reduce((a, b) => a + b, 0);
        expect(Math.abs(sum - 1)).toBeLessThanOrEqual(1e-9);
      }
    }
    expect(() => validatePortable(portable)).not.toThrow();
  });
});

describe("forest and boosting export", () => {
  it("exports a 10-tree forest with unit weights and one-hot leaves", () => {
    const { X, y, names } = syntheticTable();
    const source = trainSource(X, y, names, { kind: "rf", nTrees: 10, maxDepth: 3, seed: 9 });
    const portable = exportToPortable(source);
    expect(portable.model_kind).toBe("random_forest");
    expect(portable.trees).toHaveLength(10);
    expect(portable.trees.every((t) => t.weight === 1.0)).toBe(true);
    for (const tree of portable.trees) {
      for (const node of tree.nodes) {
        if (isLeaf(node)) {
          expect(node.distribution.filter((v) => v === 1)).toHaveLength(1);
          expect(node.distribution.filter((v) => v === 0)).toHaveLength(
            node.distribution.length - 1,
          );
        }
      }
    }
  });

  it("carries boosting stage weights into the tree weights", () => {
    const { X, y, names } = syntheticTable();
    const source = trainSource(X, y, names, { kind: "ab", nTrees: 8, maxDepth: 2, seed: 9 });
    const stages = (source.model as SammeModel).stages;
    const portable = exportToPortable(source);
    expect(portable.model_kind).toBe("adaboost");
    expect(portable.trees.map((t) => t.weight)).toEqual(stages.map((s) => s.alpha));
    expect(stages.every((s) => s.alpha > 0)).toBe(true);
  });

  it("remaps forest split columns through the per-tree feature indexes", () => {
    const { X, y, names } = syntheticTable(300, 11);
    const source = trainSource(X, y, names, { kind: "rf", nTrees: 12, maxDepth: 3, seed: 23 });
    const portable = exportToPortable(source);
    // with remapping intact the exported forest reproduces the library's votes
    const report = verifyParity(source, portable, 400, 31);
    expect(report.nMismatches).toBe(0);
  });
});

describe("parity verification", () => {
  it("reports zero mismatches for a faithful export of each kind", () => {
    const { X, y, names } = syntheticTable();
    for (const kind of ["dt", "rf", "ab"] as const) {
      const source = trainSource(X, y, names, { kind, nTrees: 10, maxDepth: 3, seed: 5 });
      const { portable } = exportModel(source);
      const report = verifyParity(source, portable, 500, 7);
      expect(report.pass).toBe(true);
      expect(report.nMismatches).toBe(0);
      expect(report.nChecked + report.nTies).toBe(500);
    }
  });

  it("detects a deliberately corrupted threshold", () => {
    const { X, y, names } = syntheticTable();
    const source = trainSource(X, y, names, { kind: "dt", maxDepth: 4, seed: 5 });
    const { portable } = exportModel(source);
    const tree = portable.trees[0];
    const root = tree.nodes.find((n) => n.id === tree.root) as PortableInternalNode;
    root.threshold = root.threshold > 0.5 ? 0.05 : 0.95;
    const report = verifyParity(source, portable, 500, 7);
    expect(report.pass).toBe(false);
    expect(report.nMismatches).toBeGreaterThanOrEqual(1);
    expect(report.mismatches.length).toBeLessThanOrEqual(10);
    expect(report.mismatches[0]).toHaveProperty("point");
  });

  it("treats zero probe points as a vacuous pass with a warning", () => {
    const { X, y, names } = syntheticTable();
    const source = trainSource(X, y, names, { kind: "dt", maxDepth: 2, seed: 5 });
    const { portable } = exportModel(source);
    const report = verifyParity(source, portable, 0, 7);
    expect(report.pass).toBe(true);
    expect(report.warning).toMatch(/vacuous/);
    expect(report.nChecked).toBe(0);
  });

  it("rejects unfitted or unsupported sources", () => {
    const bogus = { source_kind: "gbm", n_classes: 2, feature_names: ["a"], model: {} };
    expect(() => exportToPortable(bogus as unknown as SourceFile)).toThrow(/unsupported/);
    const unfitted: SourceFile = {
      source_kind: "dt",
      n_classes: 2,
      feature_names: ["a"],
      model: { root: {} },
    };
    expect(() => exportToPortable(unfitted)).toThrow();
  });
});

describe("portable evaluator", () => {
  it("breaks argmax ties toward the lowest class index", () => {
    const model = {
      format_version: 1 as const,
      model_kind: "adaboost" as const,
      n_classes: 2,
      feature_names: ["f0"],
      child_convention: "gt_left" as const,
      trees: [
        { weight: 1.0, root: 0, nodes: [{ id: 0, kind: "leaf" as const, distribution: [0.5, 0.5] }] },
      ],
    };
    expect(predict(model, [0.3])).toBe(0);
    expect(ensembleScores(model, [0.3])).toEqual([0.5, 0.5]);
  });

  it("agrees with the source model on its own training rows", () => {
    const { X, y, names } = syntheticTable();
    for (const kind of ["dt", "rf", "ab"] as const) {
      const source = trainSource(X, y, names, { kind, nTrees: 10, maxDepth: 3, seed: 5 });
      const portable = exportToPortable(source);
      const fromSource = sourcePredict(source, X);
      let checked = 0;
      for (let i = 0; i < X.length; i++) {
        const scores = ensembleScores(portable, X[i]);
        const top = Math.max(...scores);
        if (scores.filter((s) => s === top).length > 1) continue;
        checked++;
        expect(predict(portable, X[i])).toBe(fromSource[i]);
      }
      expect(checked).toBeGreaterThan(X.length / 2);
    }
  });
});
