/** Tiny element builder, enough hyperscript for a console this size. */

type Child = Node | string | null | undefined;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value);
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

/**
 * Text node whose digits came from a service response. The data attribute
 * is what UI tests scan when they assert number provenance.
 */
export function serviceNumber(text: string, label?: string): HTMLElement {
  const span = el("span", { "data-source": "service" }, text);
  if (label) span.setAttribute("data-label", label);
  return span;
}

export function clear(node: Element): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}
