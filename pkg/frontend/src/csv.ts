/** Minimal CSV reader for the sweep result files (comma-separated, header
 * row, no quoting, '.' decimal). */

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    return { columns: [], rows: [] };
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    columns.forEach((c, i) => (row[c] = cells[i] ?? ""));
    return row;
  });
  return { columns, rows };
}

export function numericColumn(table: Table, name: string): number[] {
  return table.rows.map((r) => Number(r[name]));
}
