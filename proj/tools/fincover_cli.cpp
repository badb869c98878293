#include <cstdio>

int main() {
  std::puts("fincover: command line interface not wired up yet");
  return 2;
}
