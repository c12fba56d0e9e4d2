// UI state and its pure transitions. Rendered hits always mirror the last
// successful response; a failed query keeps the previous results visible.

import type { CorpusInfo, LanguagePair, QueryFilters, QueryHit, QueryResponse } from "./types.js";

export interface UiState {
  queryText: string;
  pair: LanguagePair | null;
  filters: QueryFilters;
  lastResponse: QueryResponse | null;
  selectedHit: QueryHit | null;
  inFlight: boolean;
  error: string | null;
}

export function initialState(): UiState {
  return {
    queryText: "",
    pair: null,
    filters: {},
    lastResponse: null,
    selectedHit: null,
    inFlight: false,
    error: null,
  };
}

export function canSubmit(state: UiState): boolean {
  return state.queryText.trim().length > 0 && state.pair !== null;
}

export function beginQuery(state: UiState): UiState {
  return { ...state, inFlight: true, error: null };
}

export function completeQuery(state: UiState, response: QueryResponse): UiState {
  return { ...state, inFlight: false, error: null, lastResponse: response, selectedHit: null };
}

// the previous response is retained so the archivist never loses context
export function failQuery(state: UiState, message: string): UiState {
  return { ...state, inFlight: false, error: message };
}

export function selectHit(state: UiState, hit: QueryHit | null): UiState {
  return { ...state, selectedHit: hit };
}

// every listed pair yields both directions; deduped and sorted for the selector
export function pairsFromCorpora(corpora: CorpusInfo[]): LanguagePair[] {
  const seen = new Set<string>();
  const pairs: LanguagePair[] = [];
  for (const corpus of corpora) {
    for (const raw of corpus.language_pairs) {
      const parts = raw.split("-");
      if (parts.length !== 2 || !parts[0] || !parts[1]) continue;
      for (const [source, target] of [
        [parts[0], parts[1]],
        [parts[1], parts[0]],
      ] as [string, string][]) {
        const key = `${source}->${target}`;
        if (!seen.has(key)) {
          seen.add(key);
          pairs.push({ source, target });
        }
      }
    }
  }
  pairs.sort((a, b) => (a.source + a.target).localeCompare(b.source + b.target));
  return pairs;
}
