/**
 * Portable tree-ensemble model format and its reference evaluator.
 *
 * Split convention is `gt_left`: the left child is taken when
 * `x[feature] > threshold`, the right child when `x[feature] <= threshold`.
 * Leaf distributions are normalized probability vectors; ensemble prediction
 * is the argmax of the weight-summed leaf distributions, ties broken toward
 * the lowest class index.
 */

export interface PortableInternalNode {
  id: number;
  kind: "internal";
  feature: number;
  threshold: number;
  left: number;
  right: number;
}

export interface PortableLeafNode {
  id: number;
  kind: "leaf";
  distribution: number[];
}

export type PortableNode = PortableInternalNode | PortableLeafNode;

export interface PortableTree {
  weight: number;
  root: number;
  nodes: PortableNode[];
}

export type ModelKind = "decision_tree" | "random_forest" | "adaboost";

export interface PortableModel {
  format_version: 1;
  model_kind: ModelKind;
  n_classes: number;
  feature_names: string[];
  child_convention: "gt_left";
  trees: PortableTree[];
}

export function isLeaf(node: PortableNode): node is PortableLeafNode {
  return node.kind === "leaf";
}

function nodeIndex(tree: PortableTree): Map<number, PortableNode> {
  const byId = new Map<number, PortableNode>();
  for (const node of tree.nodes) {
    if (byId.has(node.id)) {
      throw new Error(`duplicate node id ${node.id}`);
    }
    byId.set(node.id, node);
  }
  return byId;
}

/** Weighted class scores of the ensemble at a point, summed in tree order. */
export function ensembleScores(model: PortableModel, x: number[]): number[] {
  const scores = new Array<number>(model.n_classes).fill(0);
  for (const tree of model.trees) {
    const byId = nodeIndex(tree);
    let node = byId.get(tree.root);
    if (!node) throw new Error(`missing root node ${tree.root}`);
    while (!isLeaf(node)) {
      const next = x[node.feature] > node.threshold ? node.left : node.right;
      const child = byId.get(next);
      if (!child) throw new Error(`missing node ${next}`);
      node = child;
    }
    for (let k = 0; k < model.n_classes; k++) {
      scores[k] += tree.weight * (node.distribution[k] ?? 0);
    }
  }
  return scores;
}

export function argmaxLowest(scores: number[]): number {
  let best = 0;
  for (let k = 1; k < scores.length; k++) {
    if (scores[k] > scores[best]) best = k;
  }
  return best;
}

export function predict(model: PortableModel, x: number[]): number {
  return argmaxLowest(ensembleScores(model, x));
}

/** True when the top aggregated score is attained by more than one class. */
export function isScoreTie(scores: number[]): boolean {
  const top = Math.max(...scores);
  return scores.filter((s) => s === top).length > 1;
}

/** Structural sanity of an exported model; throws naming the offender. */
export function validatePortable(model: PortableModel): void {
  if (model.format_version !== 1) throw new Error("format_version must be 1");
  if (model.child_convention !== "gt_left") {
    throw new Error("child_convention must be gt_left");
  }
  if (model.trees.length === 0) throw new Error("model has no trees");
  for (const [ti, tree] of model.trees.entries()) {
    const byId = nodeIndex(tree);
    if (!byId.has(tree.root)) throw new Error(`tree ${ti}: missing root`);
    for (const node of tree.nodes) {
      if (isLeaf(node)) {
        if (node.distribution.length !== model.n_classes) {
          throw new Error(`tree ${ti} node ${node.id}: distribution length`);
        }
        const sum = node.distribution.reduce((a, b) => a + b, 0);
        if (node.distribution.some((v) => v < 0) || Math.abs(sum - 1) > 1e-9) {
          throw new Error(`tree ${ti} node ${node.id}: leaf not normalized`);
        }
      } else {
        if (!byId.has(node.left) || !byId.has(node.right)) {
          throw new Error(`tree ${ti} node ${node.id}: dangling child`);
        }
        if (node.feature < 0 || node.feature >= model.feature_names.length) {
          throw new Error(`tree ${ti} node ${node.id}: feature out of range`);
        }
      }
    }
  }
}
