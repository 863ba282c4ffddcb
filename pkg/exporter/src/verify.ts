/**
 * Prediction parity between a source model and its portable export.
 *
 * Probes are uniform points in the unit box from a seeded generator. Rows
 * where the portable ensemble's aggregated scores tie are excluded (the two
 * systems may break ties differently) and counted.
 */

import { PortableModel, ensembleScores, argmaxLowest, isScoreTie } from "./portable";
import { mulberry32, uniformMatrix } from "./rng";
import { SourceFile, sourcePredict } from "./sources";

export interface Mismatch {
  index: number;
  point: number[];
  source_label: number;
  portable_label: number;
}

export interface ParityReport {
  pass: boolean;
  nProbes: number;
  nChecked: number;
  nTies: number;
  nMismatches: number;
  mismatches: Mismatch[];
  warning?: string;
}

const MAX_REPORTED = 10;

export function verifyParity(
  source: SourceFile,
  portable: PortableModel,
  nPoints: number,
  seed: number,
): ParityReport {
  if (nPoints <= 0) {
    return {
      pass: true,
      nProbes: 0,
      nChecked: 0,
      nTies: 0,
      nMismatches: 0,
      mismatches: [],
      warning: "no probe points requested; parity is vacuous",
    };
  }
  const points = uniformMatrix(mulberry32(seed), nPoints, portable.feature_names.length);
  const sourceLabels = sourcePredict(source, points);
  const mismatches: Mismatch[] = [];
  let nTies = 0;
  let nChecked = 0;
  let nMismatches = 0;
  for (let i = 0; i < points.length; i++) {
    const scores = ensembleScores(portable, points[i]);
    if (isScoreTie(scores)) {
      nTies++;
      continue;
    }
    nChecked++;
    const portableLabel = argmaxLowest(scores);
    if (portableLabel !== sourceLabels[i]) {
      nMismatches++;
      if (mismatches.length < MAX_REPORTED) {
        mismatches.push({
          index: i,
          point: points[i],
          source_label: sourceLabels[i],
          portable_label: portableLabel,
        });
      }
    }
  }
  return {
    pass: nMismatches === 0,
    nProbes: nPoints,
    nChecked,
    nTies,
    nMismatches,
    mismatches,
  };
}
