import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    globalSetup: ["tests/setup-service.ts"],
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // the workflow test owns the single shared service session; keep files sequential
    fileParallelism: false,
  },
});
