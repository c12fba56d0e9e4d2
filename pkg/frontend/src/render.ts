// DOM rendering. Hits are laid out in response order, scores and years are
// printed verbatim from the payload, and user text goes through textContent.

import type { LanguagePair, QueryHit } from "./types.js";

export function renderPairSelector(select: HTMLSelectElement, pairs: LanguagePair[]): void {
  select.innerHTML = "";
  for (const pair of pairs) {
    const option = document.createElement("option");
    option.value = `${pair.source}->${pair.target}`;
    option.textContent = `${pair.source} → ${pair.target}`;
    select.appendChild(option);
  }
  select.disabled = pairs.length === 0;
}

export function renderHits(
  list: HTMLElement,
  hits: QueryHit[],
  onOpen: (hit: QueryHit) => void,
): void {
  list.innerHTML = "";
  for (const hit of hits) {
    const item = document.createElement("li");
    item.className = "hit";
    item.dataset.id = hit.id;

    const score = document.createElement("span");
    score.className = "hit-score";
    score.textContent = String(hit.score);

    const text = document.createElement("span");
    text.className = "hit-text";
    text.textContent = hit.text;

    const meta = document.createElement("span");
    meta.className = "hit-meta";
    meta.textContent = `${hit.newspaper}, ${String(hit.year)}`;

    item.append(score, text, meta);
    item.addEventListener("click", () => onOpen(hit));
    list.appendChild(item);
  }
}

export function renderBanner(banner: HTMLElement, message: string | null): void {
  banner.textContent = message ?? "";
  banner.hidden = message === null;
}

export function renderStatus(status: HTMLElement, message: string): void {
  status.textContent = message;
}

// context sentences in article order, the originating hit highlighted
export function renderContext(
  panel: HTMLElement,
  sentences: QueryHit[] | null,
  highlightId: string | null,
  placeholder: string | null = null,
): void {
  panel.innerHTML = "";
  if (placeholder !== null) {
    const p = document.createElement("p");
    p.className = "context-placeholder";
    p.textContent = placeholder;
    panel.appendChild(p);
    return;
  }
  if (sentences === null) return;
  for (const sentence of sentences) {
    const p = document.createElement("p");
    p.className = sentence.id === highlightId ? "context-sentence highlight" : "context-sentence";
    p.dataset.id = sentence.id;
    p.textContent = sentence.text;
    panel.appendChild(p);
  }
}

// ids end in the sentence's position within its article
export function articleOrder(sentences: QueryHit[]): QueryHit[] {
  const index = (id: string): number => {
    const tail = id.split(":").pop() ?? "";
    const n = Number(tail);
    return Number.isFinite(n) ? n : Number.MAX_SAFE_INTEGER;
  };
  return [...sentences].sort((a, b) => index(a.id) - index(b.id));
}
