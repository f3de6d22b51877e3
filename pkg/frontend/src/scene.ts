// Stimulus loading.  Scenes are the same PGM graymaps the engine
// gates its exploration map with (served under /clutter/<image_id>.pgm
// next to the bundle), so the display and the engine see one set of
// pixels.  Without assets the console falls back to a deterministic
// placeholder texture.

export interface Graymap {
  width: number;
  height: number;
  values: Float32Array; // row-major, [0, 1]
}

// Binary PGM (P5), 8-bit or big-endian 16-bit, comment-tolerant.
export function decodePgm(bytes: Uint8Array): Graymap {
  let pos = 0;
  const isSpace = (b: number) => b === 32 || b === 9 || b === 10 || b === 13;

  function token(): string {
    while (pos < bytes.length) {
      if (isSpace(bytes[pos])) {
        pos++;
      } else if (bytes[pos] === 35) {
        // '#' comment runs to end of line
        while (pos < bytes.length && bytes[pos] !== 10) pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    if (start === pos) {
      throw new Error("truncated PGM header");
    }
    return String.fromCharCode(...bytes.subarray(start, pos));
  }

  const magic = token();
  if (magic !== "P5") {
    throw new Error("not a binary PGM (magic " + JSON.stringify(magic) + ")");
  }
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0) || !(height > 0) || !(maxval > 0) || maxval > 65535) {
    throw new Error("bad PGM header");
  }
  pos++; // single whitespace byte after maxval
  const deep = maxval > 255;
  const need = width * height * (deep ? 2 : 1);
  if (bytes.length - pos < need) {
    throw new Error("truncated PGM pixel data");
  }
  const values = new Float32Array(width * height);
  for (let i = 0; i < values.length; i++) {
    const v = deep ? (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
    values[i] = v / maxval;
  }
  return { width: width, height: height, values: values };
}

export async function fetchScene(imageId: string): Promise<Graymap | null> {
  try {
    const resp = await fetch("clutter/" + encodeURIComponent(imageId) + ".pgm");
    if (!resp.ok) {
      return null;
    }
    return decodePgm(new Uint8Array(await resp.arrayBuffer()));
  } catch {
    return null;
  }
}

// Deterministic pseudo-noise so the console works without any assets;
// seeded from the image id, so each id gets a stable texture.
export function placeholderScene(imageId: string, width: number, height: number): Graymap {
  let seed = 2166136261;
  for (let i = 0; i < imageId.length; i++) {
    seed = (seed ^ imageId.charCodeAt(i)) >>> 0;
    seed = Math.imul(seed, 16777619) >>> 0;
  }
  const values = new Float32Array(width * height);
  let s = seed || 1;
  for (let i = 0; i < values.length; i++) {
    // xorshift32
    s ^= s << 13;
    s >>>= 0;
    s ^= s >> 17;
    s ^= s << 5;
    s >>>= 0;
    values[i] = 0.25 + 0.5 * (s / 4294967295);
  }
  return { width: width, height: height, values: values };
}
