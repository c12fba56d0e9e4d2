// Controller: wires DOM events to the API client and pure state/render
// functions. One query may be in flight at a time; a rapid re-submit
// aborts the prior request and the newest response wins.

import { ApiClient } from "./api.js";
import {
  beginQuery,
  canSubmit,
  completeQuery,
  failQuery,
  initialState,
  pairsFromCorpora,
  selectHit,
  type UiState,
} from "./state.js";
import {
  articleOrder,
  renderBanner,
  renderContext,
  renderHits,
  renderPairSelector,
  renderStatus,
} from "./render.js";
import type { LanguagePair, QueryHit } from "./types.js";

export interface AppElements {
  form: HTMLFormElement;
  input: HTMLInputElement;
  submit: HTMLButtonElement;
  pairSelect: HTMLSelectElement;
  newspaper: HTMLInputElement;
  yearMin: HTMLInputElement;
  yearMax: HTMLInputElement;
  hits: HTMLElement;
  banner: HTMLElement;
  status: HTMLElement;
  context: HTMLElement;
}

const CONTEXT_K = 100;

export class App {
  private state: UiState = initialState();
  private pairs: LanguagePair[] = [];
  private controller: AbortController | null = null;
  private readonly contextCache = new Map<string, QueryHit[]>();

  constructor(
    private readonly api: ApiClient,
    private readonly el: AppElements,
  ) {}

  async init(): Promise<void> {
    this.el.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
    this.el.input.addEventListener("input", () => {
      this.state = { ...this.state, queryText: this.el.input.value };
      this.sync();
    });
    this.el.pairSelect.addEventListener("change", () => {
      const pair = this.pairs.find((p) => `${p.source}->${p.target}` === this.el.pairSelect.value);
      this.state = { ...this.state, pair: pair ?? null };
      this.sync();
    });

    try {
      const [health, corpora] = await Promise.all([this.api.health(), this.api.corpora()]);
      this.pairs = pairsFromCorpora(corpora);
      renderPairSelector(this.el.pairSelect, this.pairs);
      this.state = { ...this.state, pair: this.pairs[0] ?? null };
      const total = corpora.reduce((n, c) => n + c.sentence_count, 0);
      renderStatus(this.el.status, `backend ${health.status}, ${total} sentences indexed`);
    } catch (err) {
      renderStatus(this.el.status, `backend unavailable: ${messageOf(err)}`);
    }
    this.sync();
  }

  async submit(): Promise<void> {
    const pair = this.state.pair;
    if (!canSubmit(this.state) || pair === null) return;
    this.controller?.abort();
    this.controller = new AbortController();
    const mine = this.controller;
    this.state = beginQuery(this.state);
    this.sync();
    try {
      const response = await this.api.query(
        {
          text: this.state.queryText,
          source_lang: pair.source,
          target_side: pair.target,
          k: 10,
          filters: this.filters(),
        },
        mine.signal,
      );
      if (mine !== this.controller) return; // superseded by a newer submit
      this.state = completeQuery(this.state, response);
    } catch (err) {
      if (isAbort(err) || mine !== this.controller) return;
      this.state = failQuery(this.state, messageOf(err));
    }
    this.sync();
  }

  // sibling sentences come from /query scoped to the hit's article; the
  // same article is never fetched twice
  async openContext(hit: QueryHit): Promise<void> {
    const pair = this.state.pair;
    if (pair === null) return;
    this.state = selectHit(this.state, hit);
    const key = `${pair.target}:${hit.article_id}`;
    let sentences = this.contextCache.get(key);
    if (sentences === undefined) {
      try {
        const response = await this.api.query({
          text: hit.text,
          target_side: pair.target,
          k: CONTEXT_K,
          filters: { article_id: hit.article_id },
        });
        sentences = articleOrder(response.hits);
        this.contextCache.set(key, sentences);
      } catch (err) {
        renderContext(this.el.context, null, null, `article unavailable: ${messageOf(err)}`);
        return;
      }
    }
    if (sentences.length === 0) {
      renderContext(this.el.context, null, null, "article not found");
      return;
    }
    renderContext(this.el.context, sentences, hit.id);
  }

  private filters() {
    const filters: { newspaper?: string; year_min?: number; year_max?: number } = {};
    const newspaper = this.el.newspaper.value.trim();
    if (newspaper) filters.newspaper = newspaper;
    const yearMin = parseInt(this.el.yearMin.value, 10);
    if (Number.isFinite(yearMin)) filters.year_min = yearMin;
    const yearMax = parseInt(this.el.yearMax.value, 10);
    if (Number.isFinite(yearMax)) filters.year_max = yearMax;
    return filters;
  }

  private sync(): void {
    this.el.submit.disabled = !canSubmit(this.state);
    renderBanner(this.el.banner, this.state.error);
    renderHits(this.el.hits, this.state.lastResponse?.hits ?? [], (hit) => {
      void this.openContext(hit);
    });
    if (this.state.selectedHit === null) {
      renderContext(this.el.context, null, null);
    }
    if (this.state.inFlight) {
      renderStatus(this.el.status, "searching…");
    } else if (this.state.lastResponse !== null) {
      const n = this.state.lastResponse.hits.length;
      renderStatus(this.el.status, n === 1 ? "1 hit" : `${n} hits`);
    }
  }
}

function isAbort(err: unknown): boolean {
  // fetch aborts reject with a DOMException, not an Error subclass
  return typeof err === "object" && err !== null && (err as { name?: unknown }).name === "AbortError";
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export function mountApp(doc: Document, api: ApiClient): App {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (el === null) throw new Error(`missing element #${id}`);
    return el as T;
  };
  const app = new App(api, {
    form: byId<HTMLFormElement>("search-form"),
    input: byId<HTMLInputElement>("query"),
    submit: byId<HTMLButtonElement>("submit"),
    pairSelect: byId<HTMLSelectElement>("pair"),
    newspaper: byId<HTMLInputElement>("filter-newspaper"),
    yearMin: byId<HTMLInputElement>("filter-year-min"),
    yearMax: byId<HTMLInputElement>("filter-year-max"),
    hits: byId("hits"),
    banner: byId("banner"),
    status: byId("status"),
    context: byId("context"),
  });
  void app.init();
  return app;
}
