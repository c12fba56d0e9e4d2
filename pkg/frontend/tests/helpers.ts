// Shared fixtures: a canned-response backend behind the injected fetch,
// and the page skeleton the controller mounts onto.

import { ApiClient, type FetchLike } from "../src/api.js";
import { App, type AppElements } from "../src/app.js";
import type { CorpusInfo, HealthInfo, QueryHit, QueryResponse } from "../src/types.js";

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export const HEALTH: HealthInfo = { status: "ok", uptime_s: 2.5 };

export const CORPORA: CorpusInfo[] = [
  {
    name: "demo",
    sides: { de: 10, lb: 10 },
    language_pairs: ["de-lb"],
    sentence_count: 20,
    adapter: false,
  },
];

export interface Call {
  url: string;
  init?: RequestInit;
}

type Route = (call: Call, nth: number) => Response | Promise<Response>;

export class FixtureBackend {
  calls: Call[] = [];

  constructor(private readonly routes: Record<string, Route>) {}

  fetch: FetchLike = (url, init) => {
    const call: Call = { url, init };
    this.calls.push(call);
    const route = this.routes[url];
    if (route === undefined) {
      return Promise.resolve(jsonResponse(404, { error: `no route for ${url}` }));
    }
    const nth = this.calls.filter((c) => c.url === url).length;
    return Promise.resolve(route(call, nth));
  };

  queryBodies(): Record<string, unknown>[] {
    return this.calls
      .filter((c) => c.url === "/query")
      .map((c) => JSON.parse(String(c.init?.body)) as Record<string, unknown>);
  }

  queryCount(): number {
    return this.calls.filter((c) => c.url === "/query").length;
  }
}

const PAGE = `
  <p id="status"></p>
  <form id="search-form">
    <input id="query" type="text">
    <select id="pair" disabled></select>
    <button id="submit" type="submit" disabled>Search</button>
    <input id="filter-newspaper" type="text">
    <input id="filter-year-min" type="number">
    <input id="filter-year-max" type="number">
  </form>
  <p id="banner" hidden></p>
  <ol id="hits"></ol>
  <aside id="context"></aside>
`;

export function pageElements(): AppElements {
  document.body.innerHTML = PAGE;
  const byId = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;
  return {
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
  };
}

export async function startApp(backend: FixtureBackend): Promise<{ app: App; el: AppElements }> {
  const el = pageElements();
  const app = new App(new ApiClient("", backend.fetch), el);
  await app.init();
  return { app, el };
}

export function typeQuery(el: AppElements, text: string): void {
  el.input.value = text;
  el.input.dispatchEvent(new Event("input"));
}

export function hitsResponse(hits: QueryHit[]): QueryResponse {
  return {
    hits,
    config: {
      k: 10,
      target_side: "lb",
      source_lang: "de",
      filters: {},
      adapter: false,
      index: "demo",
    },
  };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
