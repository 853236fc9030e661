import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    testTimeout: 60_000,
    hookTimeout: 60_000,
    // e2e tests spawn one gateway per file; keep files sequential
    fileParallelism: false,
  },
});
