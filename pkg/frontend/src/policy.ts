// Monotone attribute access policies: AND / OR / k-of-n threshold gates over
// namespaced attributes like "role:doctor".  Grammar and canonical rendering
// are shared with the CLI side, so render(parse(text)) round-trips and both
// clients embed identical policy strings in envelope headers.

export class PolicyError extends Error {
  position?: number;
  constructor(message: string, position?: number) {
    super(position !== undefined ? `${message} (at position ${position})` : message);
    this.position = position;
  }
}

export interface Leaf {
  kind: "leaf";
  attribute: string; // normalized "namespace:name"
}

export interface Gate {
  kind: "gate";
  k: number;
  children: PolicyNode[];
}

export type PolicyNode = Leaf | Gate;

const ATTR_PART = /^[a-z0-9_]+$/;

export function parseAttribute(text: string): string {
  const parts = text.trim().toLowerCase().split(":");
  if (parts.length !== 2) {
    throw new PolicyError(`attribute ${JSON.stringify(text)} must have the form namespace:name`);
  }
  if (!ATTR_PART.test(parts[0]) || !ATTR_PART.test(parts[1])) {
    throw new PolicyError(
      `attribute ${JSON.stringify(text)} may only contain ASCII letters, digits and underscore`,
    );
  }
  return `${parts[0]}:${parts[1]}`;
}

export function leaf(attribute: string): Leaf {
  return { kind: "leaf", attribute: parseAttribute(attribute) };
}

export function gate(k: number, children: PolicyNode[]): Gate {
  if (children.length < 2) throw new PolicyError("gates need at least two children");
  if (k < 1 || k > children.length) {
    throw new PolicyError(`threshold ${k} out of range for ${children.length} children`);
  }
  return { kind: "gate", k, children };
}

export function leaves(node: PolicyNode): Leaf[] {
  if (node.kind === "leaf") return [node];
  return node.children.flatMap(leaves);
}

// ---------------------------------------------------------------------------
// Parsing

type Token = { kind: string; value: string; pos: number };

const TOKEN =
  /\s*(?:(\d+)\s*of\s*\(|(AND\b)|(OR\b)|([A-Za-z0-9_]+\s*:\s*[A-Za-z0-9_]+)|(\()|(\))|(,))/iy;
const KINDS = ["kof", "and", "or", "attr", "lpar", "rpar", "comma"];

function tokenize(text: string): Token[] {
  const out: Token[] = [];
  let pos = 0;
  while (pos < text.length) {
    TOKEN.lastIndex = pos;
    const m = TOKEN.exec(text);
    if (!m) {
      if (text.slice(pos).trim() === "") break;
      throw new PolicyError(`unexpected input ${JSON.stringify(text.slice(pos).trim().slice(0, 10))}`, pos);
    }
    for (let i = 0; i < KINDS.length; i++) {
      if (m[i + 1] !== undefined) {
        out.push({ kind: KINDS[i], value: m[i + 1], pos: m.index });
        break;
      }
    }
    pos = TOKEN.lastIndex;
  }
  return out;
}

class Parser {
  tokens: Token[];
  idx = 0;
  constructor(readonly text: string) {
    this.tokens = tokenize(text);
  }
  peek(): Token {
    return this.tokens[this.idx] ?? { kind: "eof", value: "", pos: this.text.length };
  }
  next(): Token {
    const t = this.peek();
    this.idx += 1;
    return t;
  }

  parseOr(): PolicyNode {
    const terms = [this.parseAnd()];
    while (this.peek().kind === "or") {
      this.next();
      terms.push(this.parseAnd());
    }
    return terms.length === 1 ? terms[0] : gate(1, terms);
  }

  parseAnd(): PolicyNode {
    const factors = [this.parseFactor()];
    while (this.peek().kind === "and") {
      this.next();
      factors.push(this.parseFactor());
    }
    return factors.length === 1 ? factors[0] : gate(factors.length, factors);
  }

  parseFactor(): PolicyNode {
    const tok = this.next();
    if (tok.kind === "attr") return leaf(tok.value);
    if (tok.kind === "kof") {
      const children = [this.parseOr()];
      while (this.peek().kind === "comma") {
        this.next();
        children.push(this.parseOr());
      }
      const close = this.next();
      if (close.kind !== "rpar") throw new PolicyError("expected ')' closing threshold list", close.pos);
      return gate(parseInt(tok.value, 10), children);
    }
    if (tok.kind === "lpar") {
      const node = this.parseOr();
      const close = this.next();
      if (close.kind !== "rpar") throw new PolicyError("expected ')'", close.pos);
      return node;
    }
    throw new PolicyError(`expected attribute, threshold or '(', got ${JSON.stringify(tok.value)}`, tok.pos);
  }
}

export function parse(text: string): PolicyNode {
  if (!text || !text.trim()) throw new PolicyError("empty policy");
  const p = new Parser(text);
  const node = p.parseOr();
  const t = p.peek();
  if (t.kind !== "eof") throw new PolicyError(`trailing input ${JSON.stringify(t.value)}`, t.pos);
  return node;
}

// ---------------------------------------------------------------------------
// Rendering (canonical, minimally parenthesized; parse(render(p)) == p)

function renderNode(node: PolicyNode, parent: "and" | "or" | null): string {
  if (node.kind === "leaf") return node.attribute;
  const n = node.children.length;
  if (node.k === 1) {
    const text = node.children.map((c) => renderNode(c, "or")).join(" OR ");
    return parent === "and" || parent === "or" ? `(${text})` : text;
  }
  if (node.k === n) {
    const text = node.children.map((c) => renderNode(c, "and")).join(" AND ");
    return parent === "and" ? `(${text})` : text;
  }
  return `${node.k}of(${node.children.map((c) => renderNode(c, null)).join(", ")})`;
}

export function render(node: PolicyNode): string {
  return renderNode(node, null);
}

// ---------------------------------------------------------------------------
// Satisfaction

export function satisfies(node: PolicyNode, attrs: Iterable<string>): boolean {
  const set = new Set<string>();
  for (const a of attrs) set.add(parseAttribute(a));
  const walk = (n: PolicyNode): boolean => {
    if (n.kind === "leaf") return set.has(n.attribute);
    let count = 0;
    for (const c of n.children) if (walk(c)) count += 1;
    return count >= n.k;
  };
  return walk(node);
}
