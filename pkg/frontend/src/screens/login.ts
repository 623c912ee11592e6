// Login form. Server rejections show their code verbatim.

import { el } from "./dom";

export interface LoginScreen {
  root: HTMLElement;
  showError(code: string): void;
}

export function createLogin(
  container: HTMLElement,
  opts: { onSubmit: (username: string, password: string) => void },
): LoginScreen {
  const username = el("input", { type: "text", autocomplete: "username", placeholder: "username" });
  const password = el("input", {
    type: "password",
    autocomplete: "current-password",
    placeholder: "password",
  });
  const button = el("button", { type: "submit" }, "Sign in");
  const error = el("div", { class: "error" });
  const form = el("form", { class: "login" }, username, password, button, error);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    error.textContent = "";
    opts.onSubmit(username.value, password.value);
  });
  container.append(form);
  return {
    root: form,
    showError(code: string): void {
      error.textContent = code;
    },
  };
}
