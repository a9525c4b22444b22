import assert from "node:assert/strict";
import { spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import { test } from "node:test";

import { decodeFloat32, encodeFloat32 } from "../protocol.js";
import { collectLines, waitForExit } from "./helpers.js";

const MAIN = fileURLToPath(new URL("../main.js", import.meta.url));

const startServe = (...extra: string[]) =>
  spawn("node", [MAIN, "serve", ...extra], { stdio: ["pipe", "pipe", "inherit"] });

const request = (id: number, values: number[]): string =>
  JSON.stringify({
    id,
    height: 1,
    width: values.length,
    channels: 1,
    pixels: encodeFloat32(Float32Array.from(values)),
  }) + "\n";

test("handshake is emitted before any response", async () => {
  const child = startServe("--echo-dim", "2");
  child.stdin.write(request(0, [1, 2, 3]));
  child.stdin.end();
  const [first, second] = await collectLines(child, 2);
  assert.deepEqual(JSON.parse(first), { protocol: 1, dim: 2 });
  assert.equal(JSON.parse(second).id, 0);
  await waitForExit(child);
});

test("echo embeddings are the leading tensor values, matched by id", async () => {
  const child = startServe("--echo-dim", "3", "--scramble", "4");
  const sent = new Map<number, number[]>();
  for (let id = 0; id < 8; id++) {
    const values = [id + 0.25, id + 0.5, id + 0.75, 99];
    sent.set(id, values.slice(0, 3));
    child.stdin.write(request(id, values));
  }
  child.stdin.end();
  const lines = await collectLines(child, 9);
  const responses = lines.slice(1).map((line) => JSON.parse(line));
  const ids = responses.map((r) => r.id);
  assert.deepEqual([...ids].sort((a, b) => a - b), [0, 1, 2, 3, 4, 5, 6, 7]);
  assert.notDeepEqual(ids, [0, 1, 2, 3, 4, 5, 6, 7], "scramble must reorder responses");
  for (const response of responses) {
    const embedding = Array.from(decodeFloat32(response.embedding)).map(Math.fround);
    assert.deepEqual(embedding, sent.get(response.id)!.map(Math.fround));
  }
  await waitForExit(child);
});

test("a bad request yields an error response and the loop survives", async () => {
  const child = startServe("--echo-dim", "2");
  child.stdin.write(
    JSON.stringify({ id: 0, height: 1, width: 5, channels: 1, pixels: "!!!notbase64" }) + "\n",
  );
  child.stdin.write(request(1, [7, 8]));
  child.stdin.end();
  const lines = await collectLines(child, 3);
  const first = JSON.parse(lines[1]);
  const second = JSON.parse(lines[2]);
  assert.equal(first.id, 0);
  assert.ok(first.error, "first response should be an error");
  assert.equal(second.id, 1);
  assert.ok(second.embedding, "second request should still be answered");
  assert.equal((await waitForExit(child)) ?? 0, 0);
});

test("payload size mismatch is reported per request", async () => {
  const child = startServe("--echo-dim", "2");
  child.stdin.write(
    JSON.stringify({
      id: 5,
      height: 2,
      width: 2,
      channels: 1,
      pixels: encodeFloat32(Float32Array.from([1, 2])), // 2 values, header says 4
    }) + "\n",
  );
  child.stdin.end();
  const lines = await collectLines(child, 2);
  const response = JSON.parse(lines[1]);
  assert.equal(response.id, 5);
  assert.match(response.error, /expected 4/);
  await waitForExit(child);
});

test("exactly one response per request", async () => {
  const child = startServe("--echo-dim", "1", "--scramble", "3");
  const total = 10;
  for (let id = 0; id < total; id++) {
    child.stdin.write(request(id, [id]));
  }
  child.stdin.end();
  const lines = await collectLines(child, total + 1);
  const ids = lines.slice(1).map((line) => JSON.parse(line).id as number);
  assert.equal(ids.length, total);
  assert.equal(new Set(ids).size, total);
  await waitForExit(child);
});
