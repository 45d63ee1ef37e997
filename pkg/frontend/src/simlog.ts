/** SimLog CSV parsing and schema checks for the plot renderer. */

export interface SimLog {
  columns: string[];
  rows: number[][];
  events: LogEvent[];
}

export interface LogEvent {
  t: number;
  kind: string;
  step?: string;
  index?: number;
  [key: string]: unknown;
}

export class SchemaError extends Error {
  missing: string[];
  constructor(message: string, missing: string[] = []) {
    super(message);
    this.missing = missing;
  }
}

export function parseCsv(text: string): { columns: string[]; rows: number[][] } {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length < 2) {
    throw new SchemaError("log file has no data rows");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `row ${i} has ${cells.length} cells, header has ${columns.length}`,
      );
    }
    rows.push(cells.map(Number));
  }
  return { columns, rows };
}

export function parseEvents(text: string): LogEvent[] {
  const data = JSON.parse(text) as { events?: LogEvent[] };
  return data.events ?? [];
}

/** Column getter with a descriptive failure listing every missing name. */
export function requireColumns(log: { columns: string[] }, names: string[]): void {
  const missing = names.filter((n) => !log.columns.includes(n));
  if (missing.length > 0) {
    throw new SchemaError(
      `log is missing required columns: ${missing.join(", ")}`,
      missing,
    );
  }
}

export function column(log: SimLog, name: string): number[] {
  const idx = log.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`log is missing required columns: ${name}`, [name]);
  }
  return log.rows.map((r) => r[idx]);
}

/** Step boundaries (start times and names) from the event stream. */
export function stepBoundaries(events: LogEvent[]): { t: number; name: string }[] {
  return events
    .filter((e) => e.kind === "step_start")
    .map((e) => ({ t: e.t, name: (e.step as string) ?? "" }));
}
