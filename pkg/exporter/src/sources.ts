/**
 * Source-model files: a JS-trained classifier plus the metadata the exporter
 * needs. `source_kind` selects the library wrapper (dt = CART classifier,
 * rf = random forest, ab = SAMME boosting from this package).
 */

import { DecisionTreeClassifier } from "ml-cart";
import { RandomForestClassifier } from "ml-random-forest";

import { SammeModel, sammePredict, trainSamme } from "./adaboost";

export type SourceKind = "dt" | "rf" | "ab";

export interface SourceFile {
  source_kind: SourceKind;
  n_classes: number;
  feature_names: string[];
  model: Record<string, unknown> | SammeModel;
}

export interface TrainOptions {
  kind: SourceKind;
  nTrees?: number;
  maxDepth?: number;
  seed?: number;
}

export function trainSource(
  X: number[][],
  y: number[],
  featureNames: string[],
  options: TrainOptions,
): SourceFile {
  const { kind, nTrees = 50, maxDepth = 4, seed = 17 } = options;
  const nClasses = Math.max(...y) + 1;
  let model: SourceFile["model"];
  if (kind === "dt") {
    const learner = new DecisionTreeClassifier({ maxDepth, minNumSamples: 3 });
    learner.train(X, y);
    model = learner.toJSON();
  } else if (kind === "rf") {
    const forest = new RandomForestClassifier({
      nEstimators: nTrees,
      seed,
      noOOB: true,
      treeOptions: { maxDepth, minNumSamples: 3 },
    });
    forest.train(X, y);
    model = forest.toJSON();
  } else if (kind === "ab") {
    model = trainSamme(X, y, { nStages: nTrees, maxDepth: Math.min(maxDepth, 2), seed });
  } else {
    throw new Error(`unsupported source kind ${kind as string}`);
  }
  return {
    source_kind: kind,
    n_classes: nClasses,
    feature_names: featureNames,
    model: JSON.parse(JSON.stringify(model)),
  };
}

/** Class predictions of the source model itself (the parity ground truth). */
export function sourcePredict(source: SourceFile, X: number[][]): number[] {
  if (source.source_kind === "dt") {
    return DecisionTreeClassifier.load(source.model as object).predict(X);
  }
  if (source.source_kind === "rf") {
    return RandomForestClassifier.load(source.model as object).predict(X);
  }
  if (source.source_kind === "ab") {
    return sammePredict(source.model as SammeModel, X);
  }
  throw new Error(`unsupported source kind ${source.source_kind as string}`);
}
