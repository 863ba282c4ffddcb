/**
 * Conversion of JS-trained source models into the portable format.
 *
 * The CART library routes `x < splitValue` to its left (lesser) child and
 * `x >= splitValue` to its right (greater) child; the portable convention is
 * `x > threshold` goes left. Children are therefore swapped: portable-left is
 * the source's greater branch. The two conventions differ only at exactly
 * `x == threshold`, which random probes hit with probability zero.
 *
 * Leaf handling: CART leaf distributions are per-leaf class shares truncated
 * at the highest class seen in that leaf, so they are zero-padded to
 * n_classes. Vote-based ensembles (forest majority vote, boosting stages) are
 * exported with one-hot leaves so the portable weighted sum reproduces the
 * vote count exactly; the stage weights of the booster become the tree
 * weights. Single trees keep their full distributions.
 */

import { createHash } from "crypto";

import { SammeModel } from "./adaboost";
import {
  ModelKind,
  PortableModel,
  PortableNode,
  PortableTree,
  argmaxLowest,
  validatePortable,
} from "./portable";
import { mulberry32, uniformMatrix } from "./rng";
import { SourceFile, sourcePredict } from "./sources";
import { verifyParity } from "./verify";

interface CartNode {
  splitValue?: number;
  splitColumn?: number;
  left?: CartNode;
  right?: CartNode;
  distribution?: number[][] | number[];
}

export interface ExportRecord {
  source_fingerprint: string;
  model_kind: ModelKind;
  n_classes: number;
  n_trees: number;
  max_depth: number;
  n_leaves: number;
  parity_probes: number;
  parity_ties_excluded: number;
}

function leafDistribution(raw: number[][] | number[], nClasses: number): number[] {
  const row = Array.isArray(raw[0]) ? (raw as number[][])[0] : (raw as number[]);
  const padded = new Array<number>(nClasses).fill(0);
  for (let k = 0; k < row.length; k++) padded[k] = row[k];
  const sum = padded.reduce((a, b) => a + b, 0);
  if (sum <= 0) throw new Error("leaf with empty distribution");
  if (Math.abs(sum - 1) > 1e-12) {
    return padded.map((v) => v / sum);
  }
  return padded;
}

function isCartLeaf(node: CartNode): boolean {
  return !(node.left && node.right);
}

interface ConvertOptions {
  nClasses: number;
  oneHot: boolean;
  featureMap?: number[];
}

function convertCartTree(root: CartNode, weight: number, opts: ConvertOptions): PortableTree {
  const nodes: PortableNode[] = [];
  let nextId = 0;

  const walk = (node: CartNode): number => {
    const id = nextId++;
    if (isCartLeaf(node)) {
      if (node.distribution === undefined) {
        throw new Error("leaf node without distribution");
      }
      let dist = leafDistribution(node.distribution, opts.nClasses);
      if (opts.oneHot) {
        const onehot = new Array<number>(opts.nClasses).fill(0);
        onehot[argmaxLowest(dist)] = 1;
        dist = onehot;
      }
      nodes.push({ id, kind: "leaf", distribution: dist });
      return id;
    }
    if (node.splitColumn === undefined || node.splitValue === undefined) {
      throw new Error("internal node without split");
    }
    const feature = opts.featureMap ? opts.featureMap[node.splitColumn] : node.splitColumn;
    // source: x < splitValue -> left; portable: x > threshold -> left, so swap
    const left = walk(node.right as CartNode);
    const right = walk(node.left as CartNode);
    nodes.push({ id, kind: "internal", feature, threshold: node.splitValue, left, right });
    return id;
  };

  const rootId = walk(root);
  return { weight, root: rootId, nodes };
}

function treeDepth(tree: PortableTree): number {
  const byId = new Map(tree.nodes.map((n) => [n.id, n]));
  const depth = (id: number): number => {
    const node = byId.get(id)!;
    if (node.kind === "leaf") return 0;
    return 1 + Math.max(depth(node.left), depth(node.right));
  };
  return depth(tree.root);
}

export function fingerprint(source: SourceFile): string {
  return createHash("sha256").update(JSON.stringify(source)).digest("hex");
}

const KIND_MAP: Record<SourceFile["source_kind"], ModelKind> = {
  dt: "decision_tree",
  rf: "random_forest",
  ab: "adaboost",
};

export function exportToPortable(source: SourceFile): PortableModel {
  const nClasses = source.n_classes;
  const trees: PortableTree[] = [];
  if (source.source_kind === "dt") {
    const root = (source.model as { root: CartNode }).root;
    trees.push(convertCartTree(root, 1.0, { nClasses, oneHot: false }));
  } else if (source.source_kind === "rf") {
    const base = (source.model as { baseModel: { estimators: { root: CartNode }[]; indexes: number[][] } }).baseModel;
    base.estimators.forEach((estimator, i) => {
      trees.push(
        convertCartTree(estimator.root, 1.0, {
          nClasses,
          oneHot: true,
          featureMap: base.indexes[i],
        }),
      );
    });
  } else if (source.source_kind === "ab") {
    const model = source.model as SammeModel;
    for (const stage of model.stages) {
      const root = (stage.tree as { root: CartNode }).root;
      trees.push(convertCartTree(root, stage.alpha, { nClasses, oneHot: true }));
    }
  } else {
    throw new Error(`unsupported source kind ${source.source_kind as string}`);
  }
  const portable: PortableModel = {
    format_version: 1,
    model_kind: KIND_MAP[source.source_kind],
    n_classes: nClasses,
    feature_names: source.feature_names,
    child_convention: "gt_left",
    trees,
  };
  validatePortable(portable);
  return portable;
}

/** Convert and verify prediction parity on random probes before returning. */
export function exportModel(
  source: SourceFile,
  parityProbes = 200,
  paritySeed = 7,
): { portable: PortableModel; record: ExportRecord } {
  const portable = exportToPortable(source);
  const parity = verifyParity(source, portable, parityProbes, paritySeed);
  if (!parity.pass) {
    throw new Error(
      `export parity check failed: ${parity.mismatches.length} mismatch(es), first at probe ${parity.mismatches[0]?.index}`,
    );
  }
  const record: ExportRecord = {
    source_fingerprint: fingerprint(source),
    model_kind: portable.model_kind,
    n_classes: portable.n_classes,
    n_trees: portable.trees.length,
    max_depth: Math.max(...portable.trees.map(treeDepth)),
    n_leaves: portable.trees.reduce(
      (acc, t) => acc + t.nodes.filter((n) => n.kind === "leaf").length,
      0,
    ),
    parity_probes: parity.nChecked,
    parity_ties_excluded: parity.nTies,
  };
  return { portable, record };
}

/** Uniform unit-box probe points shared by export checks and the verify op. */
export function probePoints(nFeatures: number, n: number, seed: number): number[][] {
  return uniformMatrix(mulberry32(seed), n, nFeatures);
}

export { sourcePredict };
