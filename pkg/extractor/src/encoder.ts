/**
 * Sentence encoders: the real transformers.js-backed one and the pooling
 * helper it shares with tests.
 *
 * The sentence vector is always the final hidden state at sequence
 * position 0 (the [CLS] / <s> slot) — never mean pooling.
 */

export interface EncodeResult {
  vectors: Float32Array[];
  /** per input: was it truncated at the model max length */
  truncated: boolean[];
}

export interface SentenceEncoder {
  dim: number;
  encode(texts: string[]): Promise<EncodeResult>;
}

/** Take position 0 of a token-level batch [batch, tokens, hidden]. */
export function poolPosition0(
  data: Float32Array,
  dims: readonly number[],
): Float32Array[] {
  if (dims.length !== 3) {
    throw new Error(`expected [batch, tokens, hidden] dims, got [${dims}]`);
  }
  const [batch, tokens, hidden] = dims;
  const out: Float32Array[] = [];
  for (let b = 0; b < batch; b++) {
    const start = b * tokens * hidden;
    out.push(data.slice(start, start + hidden));
  }
  return out;
}

/**
 * Runs a pretrained checkpoint with transformers.js in deterministic
 * inference mode. The checkpoint is downloaded on first use (or read from
 * the local cache); tests use a fake encoder instead.
 */
export class TransformersJsEncoder implements SentenceEncoder {
  private constructor(
    private tokenizer: any,
    private model: any,
    public dim: number,
    private maxLength: number,
  ) {}

  static async load(modelId: string, expectedDim?: number): Promise<TransformersJsEncoder> {
    const { AutoTokenizer, AutoModel } = await import("@huggingface/transformers");
    const tokenizer = await AutoTokenizer.from_pretrained(modelId);
    const model = await AutoModel.from_pretrained(modelId);
    const config = model.config as { hidden_size?: number };
    const dim = config.hidden_size;
    if (dim === undefined) {
      throw new Error(`checkpoint ${modelId} does not declare a hidden size`);
    }
    if (expectedDim !== undefined && dim !== expectedDim) {
      throw new Error(
        `checkpoint ${modelId} has hidden size ${dim}, expected ${expectedDim}`,
      );
    }
    const maxLength: number = tokenizer.model_max_length ?? 512;
    return new TransformersJsEncoder(tokenizer, model, dim, maxLength);
  }

  async encode(texts: string[]): Promise<EncodeResult> {
    const probe = await this.tokenizer(texts, { padding: true, truncation: false });
    const fullLen = probe.input_ids.dims[1] as number;
    const truncated = texts.map(() => false);
    let inputs = probe;
    if (fullLen > this.maxLength) {
      // batch max exceeds the cap: find the offenders one by one
      for (let i = 0; i < texts.length; i++) {
        const single = await this.tokenizer(texts[i], { truncation: false });
        truncated[i] = (single.input_ids.dims[1] as number) > this.maxLength;
      }
      inputs = await this.tokenizer(texts, {
        padding: true,
        truncation: true,
        max_length: this.maxLength,
      });
    }
    const output = await this.model(inputs);
    const hidden = output.last_hidden_state;
    return {
      vectors: poolPosition0(hidden.data as Float32Array, hidden.dims),
      truncated,
    };
  }
}
