/** Entry point: ebmh-adapter-server --config <path> [--port N] [--host H] */

import { loadConfig, buildConfig } from "./config";
import { createHttpServer } from "./server";

function parseArgs(argv: string[]): { config?: string; port: number; host: string } {
  const out = { config: undefined as string | undefined, port: 8750, host: "127.0.0.1" };
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--config") out.config = argv[++i];
    else if (argv[i] === "--port") out.port = Number(argv[++i]);
    else if (argv[i] === "--host") out.host = argv[++i];
    else {
      console.error(`unknown argument: ${argv[i]}`);
      process.exit(2);
    }
  }
  if (!Number.isInteger(out.port) || out.port < 0 || out.port > 65535) {
    console.error("--port must be an integer in [0, 65535]");
    process.exit(2);
  }
  return out;
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  let config;
  try {
    config = args.config ? loadConfig(args.config) : buildConfig({}, process.cwd());
  } catch (err) {
    console.error(`config error: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  }
  const server = createHttpServer(config);
  server.listen(args.port, args.host, () => {
    const addr = server.address();
    const port = typeof addr === "object" && addr ? addr.port : args.port;
    // parseable by harnesses that spawn the server on an ephemeral port
    console.log(`adapter-server listening on http://${args.host}:${port}/v1/adapter`);
  });
  const shutdown = () => server.close(() => process.exit(0));
  process.on("SIGINT", shutdown);
  process.on("SIGTERM", shutdown);
}

main();
