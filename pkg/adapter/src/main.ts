/**
 * CLI entry: `serve` answers embedding requests on stdin/stdout,
 * `export` fills a precomputed store from a list of image files.
 */

import { readFileSync } from "node:fs";
import { stdin, stdout, stderr, argv, exit } from "node:process";
import { parseArgs } from "node:util";

import { echoModel, onnxModel, type EmbeddingModel } from "./model.js";
import { serve } from "./serve.js";
import { exportEmbeddings } from "./store.js";

const USAGE = `usage:
  main.js serve  (--echo-dim D | --model path.onnx) [--scramble N]
  main.js export (--echo-dim D | --model path.onnx) --images list.txt --out store/

--echo-dim D   test model: embedding = first D tensor values
--model PATH   ONNX model (requires onnxruntime-node)
--scramble N   buffer N responses and emit them reversed (conformance tests)
--images FILE  newline-separated image paths to export
--out DIR      store directory to write
`;

const loadModel = async (values: {
  "echo-dim"?: string;
  model?: string;
}): Promise<EmbeddingModel> => {
  if (values["echo-dim"] !== undefined && values.model !== undefined) {
    throw new Error("--echo-dim and --model are mutually exclusive");
  }
  if (values["echo-dim"] !== undefined) {
    const dim = Number(values["echo-dim"]);
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`--echo-dim must be a positive integer, got ${values["echo-dim"]}`);
    }
    return echoModel(dim);
  }
  if (values.model !== undefined) {
    return onnxModel(values.model);
  }
  throw new Error("one of --echo-dim or --model is required");
};

const main = async (): Promise<number> => {
  const [command, ...rest] = argv.slice(2);
  const { values } = parseArgs({
    args: rest,
    options: {
      "echo-dim": { type: "string" },
      model: { type: "string" },
      scramble: { type: "string" },
      images: { type: "string" },
      out: { type: "string" },
    },
  });

  if (command === "serve") {
    const model = await loadModel(values);
    const scramble = values.scramble !== undefined ? Number(values.scramble) : 1;
    await serve(model, stdin, stdout, { scramble });
    return 0;
  }
  if (command === "export") {
    if (values.images === undefined || values.out === undefined) {
      throw new Error("export needs --images and --out");
    }
    const model = await loadModel(values);
    const paths = readFileSync(values.images, "utf-8")
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
    const index = await exportEmbeddings(model, paths, values.out);
    const failed = Object.keys(index.errors).length;
    stderr.write(
      `exported ${Object.keys(index.entries).length} embeddings` +
        (failed > 0 ? `, ${failed} failed` : "") +
        ` to ${values.out}\n`,
    );
    return failed > 0 && Object.keys(index.entries).length === 0 ? 1 : 0;
  }
  stderr.write(USAGE);
  return 2;
};

main()
  .then((code) => exit(code))
  .catch((error) => {
    stderr.write(`error: ${error instanceof Error ? error.message : error}\n`);
    exit(1);
  });
