// Spawns a real hub (seeded with the table1 fixture) for contract tests.

import { ChildProcess, spawn } from "node:child_process";

export interface RunningHub {
  base: string;
  stop: () => void;
}

export function startHub(profile = "table1"): Promise<RunningHub> {
  return new Promise((resolve, reject) => {
    const child: ChildProcess = spawn(
      "python3",
      ["-u", "-m", "meshhub.cli", "sim", "seed", "--profile", profile,
       "--serve", "--port", "0"],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    let output = "";
    const timer = setTimeout(() => {
      child.kill();
      reject(new Error(`hub did not start:\n${output}`));
    }, 30_000);
    child.stdout!.on("data", (chunk: Buffer) => {
      output += chunk.toString();
      const match = output.match(/hub listening on (http:\/\/[^\s]+)/);
      if (match) {
        clearTimeout(timer);
        resolve({ base: match[1], stop: () => child.kill() });
      }
    });
    child.stderr!.on("data", (chunk: Buffer) => {
      output += chunk.toString();
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`hub exited with ${code}:\n${output}`));
    });
  });
}
