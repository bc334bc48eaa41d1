package main

import (
	"fmt"
	"os"
	"strings"
)

func main() {
	words := strings.Fields("go is fun")
	fmt.Println(len(words), strings.Join(words, "-"))
}
