#include <cstdio>

int main() {
  std::puts("slfc: command-line interface under construction");
  return 0;
}
