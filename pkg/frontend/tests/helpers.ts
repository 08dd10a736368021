import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");
export const TOKEN = "console-test-token";

export interface RunningGateway {
  baseUrl: string;
  logPath: string;
  proc: ChildProcess;
  stop(): Promise<void>;
}

/** Spawn the real gateway over the simulated network and wait for its
 * readiness line. */
export async function startGateway(): Promise<RunningGateway> {
  const out = mkdtempSync(join(tmpdir(), "console-itest-"));
  const logPath = join(out, "events.ldjson");
  const proc = spawn(
    "python3",
    [
      "-m",
      "decoychat",
      "serve",
      "--config",
      join(FIXTURES, "config.yaml"),
      "--out",
      logPath,
    ],
    {
      env: { ...process.env, DECOYCHAT_TOKEN: TOKEN },
      stdio: ["ignore", "pipe", "pipe"],
    },
  );
  const baseUrl = await new Promise<string>((resolve, reject) => {
    let seen = "";
    let errors = "";
    const timer = setTimeout(
      () => reject(new Error(`gateway start timed out; stderr: ${errors}`)),
      20000,
    );
    proc.stdout?.on("data", (chunk: Buffer) => {
      seen += chunk.toString();
      const m = seen.match(/listening on (\S+)/);
      if (m && m[1]) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
    proc.stderr?.on("data", (chunk: Buffer) => {
      errors += chunk.toString();
    });
    proc.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`gateway exited early (${code}): ${errors}`));
    });
  });
  return {
    baseUrl,
    logPath,
    proc,
    stop: () =>
      new Promise<void>((resolve) => {
        if (proc.exitCode !== null) {
          resolve();
          return;
        }
        proc.once("exit", () => resolve());
        proc.kill("SIGTERM");
        setTimeout(() => {
          proc.kill("SIGKILL");
          resolve();
        }, 3000).unref();
      }),
  };
}

export async function waitFor(
  cond: () => boolean | Promise<boolean>,
  what: string,
  timeoutMs = 10000,
): Promise<void> {
  const start = Date.now();
  for (;;) {
    if (await cond()) return;
    if (Date.now() - start > timeoutMs) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((r) => setTimeout(r, 50));
  }
}
