/** Numeric CSV loading for training data. */

import { readFileSync } from "fs";

import Papa from "papaparse";

export interface Table {
  featureNames: string[];
  X: number[][];
  y: number[];
}

export function loadNumericCsv(path: string, labelColumn: string): Table {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length) {
    throw new Error(`${path}: ${parsed.errors[0].message} (row ${parsed.errors[0].row})`);
  }
  const header = parsed.meta.fields ?? [];
  if (!header.includes(labelColumn)) {
    throw new Error(`${path}: label column '${labelColumn}' not found`);
  }
  const featureNames = header.filter((h) => h !== labelColumn);
  const X: number[][] = [];
  const y: number[] = [];
  for (const row of parsed.data) {
    X.push(featureNames.map((name) => Number(row[name])));
    y.push(Number(row[labelColumn]));
  }
  if (X.some((row) => row.some((v) => Number.isNaN(v))) || y.some(Number.isNaN)) {
    throw new Error(`${path}: non-numeric cell`);
  }
  if (y.some((v) => !Number.isInteger(v) || v < 0)) {
    throw new Error(`${path}: labels must be non-negative integers`);
  }
  return { featureNames, X, y };
}
