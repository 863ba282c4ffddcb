/**
 * End-to-end handoff: trains the three supported model kinds on a CSV,
 * exports them to the portable format, verifies parity, and writes everything
 * (plus probe points and their expected portable predictions) into one
 * directory for a consuming engine to cross-check against.
 */

import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { loadNumericCsv } from "./csv";
import { exportModel, probePoints } from "./export";
import { PortableModel, ensembleScores, isScoreTie, predict } from "./portable";
import { mulberry32, shuffledIndices } from "./rng";
import { SourceFile, trainSource, sourcePredict } from "./sources";
import { verifyParity } from "./verify";

export interface HandoffOptions {
  csvPath: string;
  labelColumn: string;
  outDir: string;
  seed?: number;
  probeCount?: number;
  trainFraction?: number;
}

export interface HandoffSummary {
  kinds: string[];
  nProbes: number;
  tiesByKind: Record<string, number>;
  trainRows: number;
  testRows: number;
}

const KIND_SETTINGS = [
  { kind: "dt" as const, nTrees: 1, maxDepth: 4 },
  { kind: "rf" as const, nTrees: 50, maxDepth: 4 },
  { kind: "ab" as const, nTrees: 50, maxDepth: 2 },
];

export function makeHandoff(options: HandoffOptions): HandoffSummary {
  const {
    csvPath,
    labelColumn,
    outDir,
    seed = 7,
    probeCount = 1000,
    trainFraction = 0.7,
  } = options;
  const table = loadNumericCsv(csvPath, labelColumn);
  const order = shuffledIndices(mulberry32(seed), table.X.length);
  const nTrain = Math.floor(trainFraction * table.X.length);
  const trainIdx = order.slice(0, nTrain);
  const testIdx = order.slice(nTrain);
  const Xtrain = trainIdx.map((i) => table.X[i]);
  const ytrain = trainIdx.map((i) => table.y[i]);

  mkdirSync(outDir, { recursive: true });
  const probes = probePoints(table.featureNames.length, probeCount, seed);
  const expected: Record<string, number[]> = {};
  const tieRows: Record<string, number[]> = {};
  const tiesByKind: Record<string, number> = {};

  for (const settings of KIND_SETTINGS) {
    const source: SourceFile = trainSource(Xtrain, ytrain, table.featureNames, {
      kind: settings.kind,
      nTrees: settings.nTrees,
      maxDepth: settings.maxDepth,
      seed,
    });
    const { portable, record } = exportModel(source, 200, seed);
    const parity = verifyParity(source, portable, probeCount, seed);
    if (!parity.pass) {
      throw new Error(`${settings.kind}: parity failed with ${parity.nMismatches} mismatches`);
    }
    expected[settings.kind] = probes.map((p) => predict(portable, p));
    tieRows[settings.kind] = probes
      .map((p, i) => (isScoreTie(ensembleScores(portable, p)) ? i : -1))
      .filter((i) => i >= 0);
    tiesByKind[settings.kind] = parity.nTies;
    writeFileSync(join(outDir, `${settings.kind}.source.json`), JSON.stringify(source));
    writeFileSync(
      join(outDir, `${settings.kind}.portable.json`),
      JSON.stringify(portable, null, 1),
    );
    writeFileSync(
      join(outDir, `${settings.kind}.record.json`),
      JSON.stringify(record, null, 1),
    );
  }

  writeFileSync(
    join(outDir, "probes.json"),
    JSON.stringify({ seed, n: probeCount, points: probes, expected, tie_rows: tieRows }),
  );
  writeFileSync(
    join(outDir, "meta.json"),
    JSON.stringify(
      {
        csv_path: csvPath,
        label_column: labelColumn,
        feature_names: table.featureNames,
        seed,
        train_fraction: trainFraction,
        train_indices: trainIdx,
        test_indices: testIdx,
      },
      null,
      1,
    ),
  );
  return {
    kinds: KIND_SETTINGS.map((s) => s.kind),
    nProbes: probeCount,
    tiesByKind,
    trainRows: trainIdx.length,
    testRows: testIdx.length,
  };
}

export { sourcePredict, verifyParity };
export type { PortableModel };
