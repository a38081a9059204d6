/** Strict CSV loading for the milestoning artifact schemas. */

import { readFileSync } from "fs";

export class SchemaError extends Error {}

export interface Table {
  header: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

/** Return the requested columns as numbers, failing loudly per column. */
export function numericColumns(
  path: string,
  table: Table,
  names: string[],
): Record<string, number[]> {
  const index = new Map(table.header.map((h, i) => [h, i]));
  const out: Record<string, number[]> = {};
  for (const name of names) {
    const col = index.get(name);
    if (col === undefined) {
      throw new SchemaError(`${path}: missing column '${name}'`);
    }
    out[name] = table.rows.map((r, line) => {
      const v = Number(r[col]);
      if (Number.isNaN(v) && r[col] !== "nan") {
        throw new SchemaError(
          `${path}: column '${name}' row ${line + 2}: not a number (${r[col]})`,
        );
      }
      return v;
    });
  }
  return out;
}
