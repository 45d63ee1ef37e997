/** Command line: render a SimLog CSV (plus events sidecar) to an SVG figure. */

import { readFileSync, writeFileSync } from "node:fs";
import { parseCsv, parseEvents, SchemaError, SimLog } from "./simlog.js";
import { defaultChannels, renderFigure } from "./render.js";

export interface CliArgs {
  input: string;
  output: string;
  events?: string;
  channels?: string[];
  title?: string;
}

export function parseArgs(argv: string[]): CliArgs {
  const out: Partial<CliArgs> = {};
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${a}`);
      return argv[i];
    };
    switch (a) {
      case "--input":
        out.input = next();
        break;
      case "--output":
        out.output = next();
        break;
      case "--events":
        out.events = next();
        break;
      case "--channels":
        out.channels = next().split(",").map((s) => s.trim()).filter((s) => s.length);
        break;
      case "--title":
        out.title = next();
        break;
      default:
        throw new Error(`unknown argument ${a}`);
    }
  }
  if (!out.input || !out.output) {
    throw new Error("usage: vkcuam-plots --input simlog.csv --output fig.svg " +
      "[--events events.json] [--channels a,b,c] [--title text]");
  }
  return out as CliArgs;
}

export function loadLog(inputPath: string, eventsPath?: string): SimLog {
  const { columns, rows } = parseCsv(readFileSync(inputPath, "utf-8"));
  const events = eventsPath ? parseEvents(readFileSync(eventsPath, "utf-8")) : [];
  return { columns, rows, events };
}

export function run(argv: string[]): number {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error(String(e instanceof Error ? e.message : e));
    return 2;
  }
  try {
    const log = loadLog(args.input, args.events);
    const svg = renderFigure(log, {
      channels: args.channels ?? defaultChannels(),
      title: args.title,
    });
    writeFileSync(args.output, svg);
    console.error(`wrote ${args.output}`);
    return 0;
  } catch (e) {
    if (e instanceof SchemaError) {
      console.error(`schema error: ${e.message}`);
      return 1;
    }
    console.error(String(e instanceof Error ? e.message : e));
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
