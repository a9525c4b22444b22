/**
 * Embedding model backends.
 *
 * The echo model exists for protocol conformance testing: its "embedding"
 * is the first N values of the incoming tensor, so the host can predict
 * every response bit-exactly. The ONNX path wraps an exported inference
 * model when onnxruntime-node is installed; it is loaded dynamically so
 * the adapter itself stays dependency-free.
 */

export interface EmbeddingModel {
  readonly dim: number;
  embed(
    pixels: Float32Array,
    height: number,
    width: number,
    channels: number,
  ): Promise<Float32Array>;
}

export const echoModel = (dim: number): EmbeddingModel => ({
  dim,
  async embed(pixels) {
    if (pixels.length < dim) {
      throw new Error(`tensor has ${pixels.length} values, echo needs ${dim}`);
    }
    return pixels.slice(0, dim);
  },
});

/**
 * Load an exported ONNX model. Input is reshaped HWC -> NCHW (no other
 * preprocessing: the host sends tensors already normalized). The embedding
 * dimension is discovered with one warm-up inference on zeros.
 */
export const onnxModel = async (
  modelPath: string,
  inputHeight = 112,
  inputWidth = 112,
): Promise<EmbeddingModel> => {
  let ort: any;
  try {
    const runtime = "onnxruntime-node"; // resolved only at run time, optional dependency
    ort = await import(runtime);
  } catch {
    throw new Error(
      "onnxruntime-node is not installed; install it to serve ONNX models, " +
        "or use --echo-dim for protocol testing",
    );
  }
  const session = await ort.InferenceSession.create(modelPath);
  const inputName = session.inputNames[0];
  const outputName = session.outputNames[0];

  const run = async (chw: Float32Array, channels: number): Promise<Float32Array> => {
    const tensor = new ort.Tensor("float32", chw, [1, channels, inputHeight, inputWidth]);
    const outputs = await session.run({ [inputName]: tensor });
    const data = outputs[outputName].data as Float32Array;
    return Float32Array.from(data);
  };

  const warmup = await run(new Float32Array(3 * inputHeight * inputWidth), 3);

  return {
    dim: warmup.length,
    async embed(pixels, height, width, channels) {
      if (height !== inputHeight || width !== inputWidth) {
        throw new Error(
          `model expects ${inputHeight}x${inputWidth}, got ${height}x${width}`,
        );
      }
      const chw = new Float32Array(channels * height * width);
      for (let c = 0; c < channels; c++) {
        for (let y = 0; y < height; y++) {
          for (let x = 0; x < width; x++) {
            chw[c * height * width + y * width + x] =
              pixels[(y * width + x) * channels + c];
          }
        }
      }
      return run(chw, channels);
    },
  };
};
