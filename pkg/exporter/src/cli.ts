#!/usr/bin/env node
/** CLI: train source models, export them, and verify prediction parity. */

import { readFileSync, writeFileSync } from "fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { loadNumericCsv } from "./csv";
import { exportModel } from "./export";
import { makeHandoff } from "./handoff";
import { PortableModel } from "./portable";
import { SourceFile, SourceKind, trainSource } from "./sources";
import { verifyParity } from "./verify";

function readJson<T>(path: string): T {
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}

async function main(): Promise<number> {
  const argv = hideBin(process.argv);
  let exitCode = 0;
  await yargs(argv)
    .scriptName("tree-model-exporter")
    .command(
      "train",
      "train a source model on a numeric CSV",
      (y) =>
        y
          .option("data", { type: "string", demandOption: true })
          .option("label", { type: "string", demandOption: true })
          .option("kind", { choices: ["dt", "rf", "ab"] as const, demandOption: true })
          .option("trees", { type: "number", default: 50 })
          .option("depth", { type: "number", default: 4 })
          .option("seed", { type: "number", default: 17 })
          .option("out", { type: "string", demandOption: true }),
      (args) => {
        const table = loadNumericCsv(args.data, args.label);
        const source = trainSource(table.X, table.y, table.featureNames, {
          kind: args.kind as SourceKind,
          nTrees: args.trees,
          maxDepth: args.depth,
          seed: args.seed,
        });
        writeFileSync(args.out, JSON.stringify(source));
        console.log(`trained ${args.kind} on ${table.X.length} rows -> ${args.out}`);
      },
    )
    .command(
      "export",
      "convert a source model file to the portable JSON format",
      (y) =>
        y
          .option("in", { type: "string", demandOption: true })
          .option("features", {
            type: "string",
            describe: "optional JSON file with feature names overriding the source file",
          })
          .option("out", { type: "string", demandOption: true }),
      (args) => {
        const source = readJson<SourceFile>(args.in);
        if (args.features) {
          source.feature_names = readJson<string[]>(args.features);
        }
        const { portable, record } = exportModel(source);
        writeFileSync(args.out, JSON.stringify(portable, null, 1));
        console.log(
          `exported ${record.model_kind}: ${record.n_trees} tree(s), ` +
            `max depth ${record.max_depth}, ${record.n_leaves} leaves -> ${args.out}`,
        );
        console.log(
          `parity precheck: ${record.parity_probes} probes, ` +
            `${record.parity_ties_excluded} tie row(s) excluded`,
        );
        console.log(JSON.stringify({ ...record, output_path: args.out }));
      },
    )
    .command(
      "verify",
      "check prediction parity between a source model and an exported file",
      (y) =>
        y
          .option("model", { type: "string", demandOption: true, describe: "source model file" })
          .option("exported", { type: "string", demandOption: true })
          .option("n", { type: "number", default: 1000 })
          .option("seed", { type: "number", default: 7 }),
      (args) => {
        const source = readJson<SourceFile>(args.model);
        const portable = readJson<PortableModel>(args.exported);
        const report = verifyParity(source, portable, args.n, args.seed);
        if (report.warning) console.warn(`warning: ${report.warning}`);
        console.log(
          `${report.pass ? "PASS" : "FAIL"}: ${report.nChecked} checked, ` +
            `${report.nTies} tie row(s) excluded, ${report.nMismatches} mismatch(es)`,
        );
        for (const m of report.mismatches) {
          console.log(
            `  probe ${m.index}: source=${m.source_label} portable=${m.portable_label}`,
          );
        }
        if (!report.pass) exitCode = 1;
      },
    )
    .command(
      "make-handoff",
      "train dt/rf/ab, export all three, and write the cross-check bundle",
      (y) =>
        y
          .option("data", { type: "string", demandOption: true })
          .option("label", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("seed", { type: "number", default: 7 })
          .option("probes", { type: "number", default: 1000 }),
      (args) => {
        const summary = makeHandoff({
          csvPath: args.data,
          labelColumn: args.label,
          outDir: args.out,
          seed: args.seed,
          probeCount: args.probes,
        });
        console.log(
          `handoff written: ${summary.kinds.join(", ")} | ` +
            `${summary.trainRows} train rows, ${summary.testRows} test rows, ` +
            `${summary.nProbes} probes`,
        );
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(msg ?? err?.message);
      exitCode = 2;
    })
    .parseAsync();
  return exitCode;
}

main().then((code) => {
  process.exitCode = code;
});
