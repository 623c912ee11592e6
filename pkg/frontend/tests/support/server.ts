// Helpers for integration tests that run against the real server: a
// node:http transport (the DOM emulator's fetch is not involved), a
// seeded jitter wrapper, and a spawner for the backend process.

import { type ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { request } from "node:http";
import { tmpdir } from "node:os";
import { join } from "node:path";
import type { Transport, TransportResponse } from "../../src/wire";

export const nodeTransport: Transport = (url, init) =>
  new Promise<TransportResponse>((resolve, reject) => {
    const u = new URL(url);
    const headers: Record<string, string> = { ...(init.headers as Record<string, string>) };
    const body = typeof init.body === "string" ? init.body : undefined;
    if (body !== undefined) {
      // the backend reads bodies by Content-Length, never chunked
      headers["Content-Length"] = String(Buffer.byteLength(body));
    }
    const req = request(
      {
        hostname: u.hostname,
        port: u.port,
        path: u.pathname + u.search,
        method: init.method ?? "GET",
        headers,
      },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (c: Buffer) => chunks.push(c));
        res.on("end", () => {
          const text = Buffer.concat(chunks).toString("utf-8");
          resolve({
            status: res.statusCode ?? 0,
            json: () => Promise.resolve(JSON.parse(text)),
          });
        });
      },
    );
    req.on("error", reject);
    if (body !== undefined) req.write(body);
    req.end();
  });

// Deterministic uniform jitter on both legs of every request.
export function jittered(inner: Transport, seed: number, maxDelayMs: number): Transport {
  let state = seed >>> 0;
  const rand = () => {
    // mulberry32
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));
  return async (url, init) => {
    await sleep(rand() * maxDelayMs);
    const res = await inner(url, init);
    await sleep(rand() * maxDelayMs);
    return res;
  };
}

export interface RunningServer {
  base: string;
  dataDir: string;
  stop(): void;
}

export async function startServer(extraArgs: string[] = []): Promise<RunningServer> {
  const dir = mkdtempSync(join(tmpdir(), "console-test-"));
  const opsPath = join(dir, "ops.json");
  writeFileSync(
    opsPath,
    JSON.stringify({
      persons: [{ person_id: "boss", password: "boss-pw", company_id: "org" }],
    }),
  );
  const proc: ChildProcessWithoutNullStreams = spawn("python3", [
    "-c",
    "from openfloor.cli import main; raise SystemExit(main())",
    "serve",
    "--listen",
    "127.0.0.1:0",
    "--data-dir",
    join(dir, "data"),
    "--config",
    opsPath,
    ...extraArgs,
  ]);
  const banner = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const onData = (chunk: Buffer) => {
      buffer += chunk.toString("utf-8");
      const nl = buffer.indexOf("\n");
      if (nl >= 0) {
        proc.stdout.off("data", onData);
        resolve(buffer.slice(0, nl).trim());
      }
    };
    proc.stdout.on("data", onData);
    proc.stderr.on("data", (c: Buffer) => {
      reject(new Error(`server failed to start: ${c.toString("utf-8")}`));
    });
    proc.on("exit", (code) => reject(new Error(`server exited early (${code})`)));
  });
  const addr = banner.split(" ").pop() as string;
  return {
    base: `http://${addr}`,
    dataDir: join(dir, "data"),
    stop() {
      proc.kill();
      rmSync(dir, { recursive: true, force: true });
    },
  };
}

export async function until(
  cond: () => boolean,
  deadlineMs: number,
  label: string,
): Promise<void> {
  const giveUp = Date.now() + deadlineMs;
  while (!cond()) {
    if (Date.now() > giveUp) {
      throw new Error(`timed out waiting for ${label}`);
    }
    await new Promise((r) => setTimeout(r, 25));
  }
}
