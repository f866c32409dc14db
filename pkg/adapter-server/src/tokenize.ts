/** Whitespace tokenization shared by the edit model and the classifier. */

export function tokenize(text: string, lowercase = false): string[] {
  const parts = text.split(/\s+/u).filter((t) => t.length > 0);
  return lowercase ? parts.map((t) => t.toLowerCase()) : parts;
}

export function detokenize(tokens: string[]): string {
  return tokens.join(" ");
}
