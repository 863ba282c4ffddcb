/**
 * SAMME boosting over shallow CART classifiers.
 *
 * The base learner has no sample-weight support, so each stage trains on a
 * weighted bootstrap resample; stage weights follow
 * `alpha = ln((1 - err) / err) + ln(K - 1)` with the weighted error measured
 * on the full training set. Prediction is the argmax over classes of the
 * alpha-weighted votes, accumulated in stage order.
 */

import { DecisionTreeClassifier } from "ml-cart";

import { argmaxLowest } from "./portable";
import { mulberry32, weightedIndices } from "./rng";

export interface SammeStage {
  alpha: number;
  tree: Record<string, unknown>;
}

export interface SammeModel {
  name: "SammeAdaBoost";
  nClasses: number;
  stages: SammeStage[];
}

export interface SammeTrainOptions {
  nStages: number;
  maxDepth?: number;
  seed?: number;
}

const MIN_ERR = 1e-10;

export function trainSamme(
  X: number[][],
  y: number[],
  options: SammeTrainOptions,
): SammeModel {
  const { nStages, maxDepth = 2, seed = 17 } = options;
  const n = X.length;
  const nClasses = Math.max(...y) + 1;
  const rng = mulberry32(seed);
  let weights = new Array<number>(n).fill(1 / n);
  const stages: SammeStage[] = [];
  while (stages.length < nStages) {
    const picks = weightedIndices(rng, weights, n);
    const Xs = picks.map((i) => X[i]);
    const ys = picks.map((i) => y[i]);
    const learner = new DecisionTreeClassifier({ maxDepth, minNumSamples: 3 });
    learner.train(Xs, ys);
    const predictions = learner.predict(X);
    let err = 0;
    for (let i = 0; i < n; i++) {
      if (predictions[i] !== y[i]) err += weights[i];
    }
    if (err >= 1 - 1 / nClasses) {
      // worse than chance on this resample; redraw
      continue;
    }
    err = Math.max(err, MIN_ERR);
    const alpha = Math.log((1 - err) / err) + Math.log(nClasses - 1);
    stages.push({ alpha, tree: learner.toJSON() });
    let total = 0;
    for (let i = 0; i < n; i++) {
      if (predictions[i] !== y[i]) weights[i] *= Math.exp(alpha);
      total += weights[i];
    }
    weights = weights.map((w) => w / total);
  }
  return { name: "SammeAdaBoost", nClasses, stages };
}

export function sammeScores(model: SammeModel, x: number[]): number[] {
  const scores = new Array<number>(model.nClasses).fill(0);
  for (const stage of model.stages) {
    const learner = DecisionTreeClassifier.load(stage.tree);
    const label = learner.predict([x])[0];
    scores[label] += stage.alpha;
  }
  return scores;
}

export function sammePredict(model: SammeModel, X: number[][]): number[] {
  // reload stage learners once, not per row
  const learners = model.stages.map((s) => DecisionTreeClassifier.load(s.tree));
  return X.map((x) => {
    const scores = new Array<number>(model.nClasses).fill(0);
    learners.forEach((learner, m) => {
      scores[learner.predict([x])[0]] += model.stages[m].alpha;
    });
    return argmaxLowest(scores);
  });
}
