export * from "./portable";
export * from "./sources";
export * from "./adaboost";
export { exportModel, exportToPortable, fingerprint, probePoints } from "./export";
export type { ExportRecord } from "./export";
export * from "./verify";
export * from "./handoff";
export { loadNumericCsv } from "./csv";
export { mulberry32, shuffledIndices, uniformMatrix } from "./rng";
