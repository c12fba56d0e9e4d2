// JSON shapes of the backend API; field names mirror the wire format.

export interface QueryFilters {
  newspaper?: string;
  year_min?: number;
  year_max?: number;
  article_id?: string;
}

export interface QueryRequest {
  text: string;
  source_lang?: string;
  target_side: string;
  k?: number;
  filters?: QueryFilters;
}

export interface QueryHit {
  id: string;
  score: number;
  text: string;
  newspaper: string;
  year: number;
  article_id: string;
}

export interface QueryConfigEcho {
  k: number;
  target_side: string;
  source_lang: string | null;
  filters: QueryFilters;
  adapter: boolean;
  index: string;
}

export interface QueryResponse {
  hits: QueryHit[];
  config: QueryConfigEcho;
}

export interface CorpusInfo {
  name: string;
  sides: Record<string, number>;
  language_pairs: string[];
  sentence_count: number;
  adapter: boolean;
}

export interface HealthInfo {
  status: string;
  uptime_s: number;
}

export interface LanguagePair {
  source: string;
  target: string;
}
