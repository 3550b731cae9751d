// Session holds the bearer token in memory only; a reload means re-login.

import { HubApi } from "./api";

export interface Session {
  token: string | null;
  userId: string | null;
}

const current: Session = { token: null, userId: null };

export function session(): Session {
  return current;
}

export async function login(api: HubApi, username: string): Promise<Session> {
  const response = await api.login(username);
  current.token = response.token;
  current.userId = response.user_id;
  return current;
}

export function logout(): void {
  current.token = null;
  current.userId = null;
}

export function requireToken(): string {
  if (!current.token) throw new Error("not logged in");
  return current.token;
}
